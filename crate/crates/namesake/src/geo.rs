//! GeoNames ingestion and spatial graph construction.
//!
//! Parses the GeoNames countryInfo and cities dump formats, computes
//! great-circle distances on a sphere, and builds the country-adjacency and
//! city-proximity graphs used for training-pair synthesis. The city graph
//! uses a latitude/longitude grid so the all-pairs distance join stays far
//! from O(n²) at dump scale.

use std::collections::HashSet;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// IUGG mean Earth radius in kilometers.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

/// Kilometers per degree of latitude on the reference sphere.
const KM_PER_DEG_LAT: f64 = EARTH_RADIUS_KM * std::f64::consts::PI / 180.0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountryNode {
    pub code: String,
    pub name: String,
    pub neighbor_codes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CityNode {
    pub geoname_id: u64,
    pub name: String,
    pub country_code: String,
    pub lat: f64,
    pub lon: f64,
    pub population: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distance_km: Option<f64>,
}

/// An undirected graph over an external node list; edges hold node indices
/// with `i < j` and, for city graphs, the measured distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialGraph {
    pub node_count: usize,
    pub edges: Vec<Edge>,
    /// Neighbor declarations that referenced an unknown node and were dropped.
    pub dropped_refs: u32,
}

impl SpatialGraph {
    /// Adjacency lists (symmetric, sorted) for the graph.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.node_count];
        for e in &self.edges {
            adj[e.i].push(e.j);
            adj[e.j].push(e.i);
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }

    /// Number of ordered node pairs covered by the undirected edge set.
    pub fn directed_edge_count(&self) -> usize {
        self.edges.len() * 2
    }
}

fn check_coord(lat: f64, lon: f64) -> Result<()> {
    if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) || lat.is_nan() || lon.is_nan() {
        return Err(Error::BadCoordinate { lat, lon });
    }
    Ok(())
}

/// Great-circle distance in kilometers between two (lat, lon) points in
/// degrees, on a sphere of radius [`EARTH_RADIUS_KM`].
pub fn haversine_km(a: (f64, f64), b: (f64, f64)) -> Result<f64> {
    check_coord(a.0, a.1)?;
    check_coord(b.0, b.1)?;
    let lat1 = a.0.to_radians();
    let lat2 = b.0.to_radians();
    let dlat = (b.0 - a.0).to_radians();
    let dlon = (b.1 - a.1).to_radians();
    let s1 = (dlat / 2.0).sin();
    let s2 = (dlon / 2.0).sin();
    let h = s1 * s1 + lat1.cos() * lat2.cos() * s2 * s2;
    Ok(2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin())
}

/// Parse the GeoNames countryInfo table: tab-separated, `#` comment lines,
/// neighbours in column 18 as comma-separated ISO codes.
pub fn parse_country_table<R: Read>(source: R) -> Result<Vec<CountryNode>> {
    let reader = BufReader::new(source);
    let mut nodes = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let row = idx + 1;
        let line = line.map_err(|e| Error::MalformedRow { row, reason: e.to_string() })?;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 18 {
            return Err(Error::MalformedRow {
                row,
                reason: format!("expected >= 18 tab-separated columns, found {}", cols.len()),
            });
        }
        let neighbours = cols.get(17).copied().unwrap_or("");
        let neighbor_codes = neighbours
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect();
        nodes.push(CountryNode {
            code: cols[0].trim().to_string(),
            name: cols[4].trim().to_string(),
            neighbor_codes,
        });
    }
    Ok(nodes)
}

/// Parse a GeoNames cities table (19 tab-separated columns), keeping rows
/// with population >= `n_hab`. Population is column 15 (1-indexed).
pub fn parse_city_table<R: Read>(source: R, n_hab: u64) -> Result<Vec<CityNode>> {
    let reader = BufReader::new(source);
    let mut nodes = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let row = idx + 1;
        let line = line.map_err(|e| Error::MalformedRow { row, reason: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 19 {
            return Err(Error::MalformedRow {
                row,
                reason: format!("expected 19 tab-separated columns, found {}", cols.len()),
            });
        }
        let parse_num = |s: &str, what: &str| -> Result<f64> {
            s.trim().parse::<f64>().map_err(|_| Error::MalformedRow {
                row,
                reason: format!("bad {what}: {s:?}"),
            })
        };
        let population = cols[14].trim().parse::<u64>().unwrap_or(0);
        if population < n_hab {
            continue;
        }
        let lat = parse_num(cols[4], "latitude")?;
        let lon = parse_num(cols[5], "longitude")?;
        check_coord(lat, lon)?;
        let geoname_id = cols[0].trim().parse::<u64>().map_err(|_| Error::MalformedRow {
            row,
            reason: format!("bad geoname id: {:?}", cols[0]),
        })?;
        nodes.push(CityNode {
            geoname_id,
            name: cols[1].trim().to_string(),
            country_code: cols[8].trim().to_string(),
            lat,
            lon,
            population,
        });
    }
    Ok(nodes)
}

/// Build the symmetric country-adjacency graph from neighbour declarations.
/// Declarations naming a code absent from the node set are dropped and
/// counted.
pub fn build_country_graph(nodes: &[CountryNode]) -> SpatialGraph {
    let index: std::collections::HashMap<&str, usize> =
        nodes.iter().enumerate().map(|(i, n)| (n.code.as_str(), i)).collect();
    let mut set = HashSet::new();
    let mut dropped = 0u32;
    for (i, node) in nodes.iter().enumerate() {
        for code in &node.neighbor_codes {
            match index.get(code.as_str()) {
                Some(&j) if j != i => {
                    set.insert((i.min(j), i.max(j)));
                }
                Some(_) => {} // self-declaration; ignore
                None => dropped += 1,
            }
        }
    }
    let mut edges: Vec<Edge> =
        set.into_iter().map(|(i, j)| Edge { i, j, distance_km: None }).collect();
    edges.sort_unstable_by_key(|e| (e.i, e.j));
    SpatialGraph { node_count: nodes.len(), edges, dropped_refs: dropped }
}

/// Grid over latitude bands used to prune the city distance join. Cell
/// heights are `d_city` in latitude; per-band cell widths are at least the
/// longitude reach of `d_city` at the band's most poleward latitude, so all
/// qualifying pairs lie within one cell of each other.
struct LatLonGrid {
    cell_deg: f64,
    rows: usize,
    /// Number of longitude cells for each latitude row (>= 1).
    row_cols: Vec<usize>,
}

impl LatLonGrid {
    fn new(d_city_km: f64) -> Self {
        let cell_deg = (d_city_km / KM_PER_DEG_LAT).max(1e-6);
        let rows = ((180.0 / cell_deg).ceil() as usize).max(1);
        let mut row_cols = Vec::with_capacity(rows);
        for r in 0..rows {
            // Most poleward |latitude| reachable from this row's lookups: the
            // row itself plus one cell height, since points in adjacent rows
            // also probe this row's columns.
            let lo = -90.0 + r as f64 * cell_deg;
            let hi = (lo + cell_deg).min(90.0);
            let max_abs_lat = (lo.abs().max(hi.abs()) + cell_deg).min(90.0);
            let cos = max_abs_lat.to_radians().cos();
            // Longitude degrees spanned by d_city at that latitude; rows
            // touching the pole collapse to a single cell.
            let need_deg = if cos <= 1e-6 { 360.0 } else { cell_deg / cos };
            let cols = ((360.0 / need_deg).floor() as usize).max(1);
            row_cols.push(cols);
        }
        LatLonGrid { cell_deg, rows, row_cols }
    }

    fn row(&self, lat: f64) -> usize {
        (((lat + 90.0) / self.cell_deg) as usize).min(self.rows - 1)
    }

    fn col(&self, row: usize, lon: f64) -> usize {
        let cols = self.row_cols[row];
        let norm = (lon + 180.0) / 360.0;
        ((norm * cols as f64) as usize).min(cols - 1)
    }
}

/// Build the city-proximity graph: an undirected edge with its distance for
/// every pair at haversine distance <= `d_city_km`. Candidate pairs come
/// from neighboring grid cells only; every candidate is verified with the
/// exact haversine distance.
pub fn build_city_graph(nodes: &[CityNode], d_city_km: f64) -> Result<SpatialGraph> {
    if d_city_km <= 0.0 {
        return Err(Error::Config("d_city must be positive".into()));
    }
    for n in nodes {
        check_coord(n.lat, n.lon)?;
    }
    let grid = LatLonGrid::new(d_city_km);
    // cell -> node indices
    let mut cells: std::collections::HashMap<(usize, usize), Vec<usize>> =
        std::collections::HashMap::new();
    for (i, n) in nodes.iter().enumerate() {
        let r = grid.row(n.lat);
        cells.entry((r, grid.col(r, n.lon))).or_default().push(i);
    }

    let mut edges = Vec::new();
    for (i, n) in nodes.iter().enumerate() {
        let r = grid.row(n.lat);
        let r_lo = r.saturating_sub(1);
        let r_hi = (r + 1).min(grid.rows - 1);
        for rr in r_lo..=r_hi {
            let cols = grid.row_cols[rr];
            let c = grid.col(rr, n.lon);
            // Neighboring columns with wraparound; a row this wide may fold
            // onto itself, hence the dedup via a small fixed set.
            let mut cand_cols = [c, (c + 1) % cols, (c + cols - 1) % cols];
            cand_cols.sort_unstable();
            let mut prev = usize::MAX;
            for &cc in &cand_cols {
                if cc == prev {
                    continue;
                }
                prev = cc;
                let Some(members) = cells.get(&(rr, cc)) else { continue };
                for &j in members {
                    if j <= i {
                        continue;
                    }
                    let m = &nodes[j];
                    let d = haversine_km((n.lat, n.lon), (m.lat, m.lon))?;
                    if d <= d_city_km {
                        edges.push(Edge { i, j, distance_km: Some(d) });
                    }
                }
            }
        }
    }
    edges.sort_unstable_by_key(|e| (e.i, e.j));
    edges.dedup_by_key(|e| (e.i, e.j));
    Ok(SpatialGraph { node_count: nodes.len(), edges, dropped_refs: 0 })
}

/// Reference O(n²) join, used by tests and for small inputs.
pub fn build_city_graph_brute_force(nodes: &[CityNode], d_city_km: f64) -> Result<SpatialGraph> {
    let mut edges = Vec::new();
    for i in 0..nodes.len() {
        for j in (i + 1)..nodes.len() {
            let d = haversine_km((nodes[i].lat, nodes[i].lon), (nodes[j].lat, nodes[j].lon))?;
            if d <= d_city_km {
                edges.push(Edge { i, j, distance_km: Some(d) });
            }
        }
    }
    Ok(SpatialGraph { node_count: nodes.len(), edges, dropped_refs: 0 })
}

/// Persist a graph as newline-delimited edge records.
pub fn write_edges<W: Write>(graph: &SpatialGraph, mut out: W) -> Result<()> {
    for e in &graph.edges {
        let line = serde_json::to_string(e)?;
        out.write_all(line.as_bytes())
            .and_then(|_| out.write_all(b"\n"))
            .map_err(|e| Error::io("<edges>", e))?;
    }
    Ok(())
}

/// Load a graph persisted by [`write_edges`].
pub fn read_edges(path: &Path, node_count: usize) -> Result<SpatialGraph> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut edges = Vec::new();
    for line in reader.lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        edges.push(serde_json::from_str::<Edge>(&line)?);
    }
    Ok(SpatialGraph { node_count, edges, dropped_refs: 0 })
}
