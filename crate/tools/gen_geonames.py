#!/usr/bin/env python3
"""Generate the pinned gazetteer-scale geodata snapshot under data/.

Produces two files in the GeoNames dump formats the CLI ingests:

  data/countryInfo.txt   tab-separated, '#' comments, >= 18 columns,
                         neighbours in column 18 as comma-separated codes
  data/cities.txt        19 tab-separated columns; population in column 15

The country roster and land-border adjacency are real (ISO 3166-1 alpha-2,
current land borders, including GI/ES, MA/EH-style pairs that GeoNames
lists). City rows are synthetic but constructed to match the documented
corpus shape: ~10.5k cities with population >= 50,000, arranged in compact
clusters so the 50 km proximity join yields a known ordered-pair count,
plus sub-threshold rows that the population filter must drop.

Deterministic: same script, same bytes. Run from the repo root:

    python3 tools/gen_geonames.py
"""

import math
import random
import os

HERE = os.path.dirname(os.path.abspath(__file__))
DATA = os.path.join(HERE, "..", "data")

EARTH_RADIUS_KM = 6371.0088

# ---------------------------------------------------------------------------
# Countries: full roster with English names.
# ---------------------------------------------------------------------------

COUNTRIES = {
    "AD": "Andorra", "AE": "United Arab Emirates", "AF": "Afghanistan",
    "AG": "Antigua and Barbuda", "AI": "Anguilla", "AL": "Albania",
    "AM": "Armenia", "AO": "Angola", "AQ": "Antarctica", "AR": "Argentina",
    "AS": "American Samoa", "AT": "Austria", "AU": "Australia",
    "AW": "Aruba", "AX": "Aland Islands", "AZ": "Azerbaijan",
    "BA": "Bosnia and Herzegovina", "BB": "Barbados", "BD": "Bangladesh",
    "BE": "Belgium", "BF": "Burkina Faso", "BG": "Bulgaria",
    "BH": "Bahrain", "BI": "Burundi", "BJ": "Benin",
    "BL": "Saint Barthelemy", "BM": "Bermuda", "BN": "Brunei",
    "BO": "Bolivia", "BQ": "Bonaire, Saint Eustatius and Saba",
    "BR": "Brazil", "BS": "Bahamas", "BT": "Bhutan",
    "BV": "Bouvet Island", "BW": "Botswana", "BY": "Belarus",
    "BZ": "Belize", "CA": "Canada", "CC": "Cocos Islands",
    "CD": "Democratic Republic of the Congo",
    "CF": "Central African Republic", "CG": "Republic of the Congo",
    "CH": "Switzerland", "CI": "Ivory Coast", "CK": "Cook Islands",
    "CL": "Chile", "CM": "Cameroon", "CN": "China", "CO": "Colombia",
    "CR": "Costa Rica", "CU": "Cuba", "CV": "Cabo Verde",
    "CW": "Curacao", "CX": "Christmas Island", "CY": "Cyprus",
    "CZ": "Czechia", "DE": "Germany", "DJ": "Djibouti", "DK": "Denmark",
    "DM": "Dominica", "DO": "Dominican Republic", "DZ": "Algeria",
    "EC": "Ecuador", "EE": "Estonia", "EG": "Egypt", "EH": "Western Sahara",
    "ER": "Eritrea", "ES": "Spain", "ET": "Ethiopia", "FI": "Finland",
    "FJ": "Fiji", "FK": "Falkland Islands", "FM": "Micronesia",
    "FO": "Faroe Islands", "FR": "France", "GA": "Gabon",
    "GB": "United Kingdom", "GD": "Grenada", "GE": "Georgia",
    "GF": "French Guiana", "GG": "Guernsey", "GH": "Ghana",
    "GI": "Gibraltar", "GL": "Greenland", "GM": "Gambia", "GN": "Guinea",
    "GP": "Guadeloupe", "GQ": "Equatorial Guinea", "GR": "Greece",
    "GS": "South Georgia and the South Sandwich Islands", "GT": "Guatemala",
    "GU": "Guam", "GW": "Guinea-Bissau", "GY": "Guyana", "HK": "Hong Kong",
    "HM": "Heard Island and McDonald Islands", "HN": "Honduras",
    "HR": "Croatia", "HT": "Haiti", "HU": "Hungary", "ID": "Indonesia",
    "IE": "Ireland", "IL": "Israel", "IM": "Isle of Man", "IN": "India",
    "IO": "British Indian Ocean Territory", "IQ": "Iraq", "IR": "Iran",
    "IS": "Iceland", "IT": "Italy", "JE": "Jersey", "JM": "Jamaica",
    "JO": "Jordan", "JP": "Japan", "KE": "Kenya", "KG": "Kyrgyzstan",
    "KH": "Cambodia", "KI": "Kiribati", "KM": "Comoros",
    "KN": "Saint Kitts and Nevis", "KP": "North Korea", "KR": "South Korea",
    "KW": "Kuwait", "KY": "Cayman Islands", "KZ": "Kazakhstan",
    "LA": "Laos", "LB": "Lebanon", "LC": "Saint Lucia",
    "LI": "Liechtenstein", "LK": "Sri Lanka", "LR": "Liberia",
    "LS": "Lesotho", "LT": "Lithuania", "LU": "Luxembourg", "LV": "Latvia",
    "LY": "Libya", "MA": "Morocco", "MC": "Monaco", "MD": "Moldova",
    "ME": "Montenegro", "MF": "Saint Martin", "MG": "Madagascar",
    "MH": "Marshall Islands", "MK": "North Macedonia", "ML": "Mali",
    "MM": "Myanmar", "MN": "Mongolia", "MO": "Macao",
    "MP": "Northern Mariana Islands", "MQ": "Martinique",
    "MR": "Mauritania", "MS": "Montserrat", "MT": "Malta",
    "MU": "Mauritius", "MV": "Maldives", "MW": "Malawi", "MX": "Mexico",
    "MY": "Malaysia", "MZ": "Mozambique", "NA": "Namibia",
    "NC": "New Caledonia", "NE": "Niger", "NF": "Norfolk Island",
    "NG": "Nigeria", "NI": "Nicaragua", "NL": "Netherlands", "NO": "Norway",
    "NP": "Nepal", "NR": "Nauru", "NU": "Niue", "NZ": "New Zealand",
    "OM": "Oman", "PA": "Panama", "PE": "Peru", "PF": "French Polynesia",
    "PG": "Papua New Guinea", "PH": "Philippines", "PK": "Pakistan",
    "PL": "Poland", "PM": "Saint Pierre and Miquelon", "PN": "Pitcairn",
    "PR": "Puerto Rico", "PS": "Palestinian Territory", "PT": "Portugal",
    "PW": "Palau", "PY": "Paraguay", "QA": "Qatar", "RE": "Reunion",
    "RO": "Romania", "RS": "Serbia", "RU": "Russia", "RW": "Rwanda",
    "SA": "Saudi Arabia", "SB": "Solomon Islands", "SC": "Seychelles",
    "SD": "Sudan", "SE": "Sweden", "SG": "Singapore",
    "SH": "Saint Helena", "SI": "Slovenia",
    "SJ": "Svalbard and Jan Mayen", "SK": "Slovakia",
    "SL": "Sierra Leone", "SM": "San Marino", "SN": "Senegal",
    "SO": "Somalia", "SR": "Suriname", "SS": "South Sudan",
    "ST": "Sao Tome and Principe", "SV": "El Salvador",
    "SX": "Sint Maarten", "SY": "Syria", "SZ": "Eswatini",
    "TC": "Turks and Caicos Islands", "TD": "Chad",
    "TF": "French Southern Territories", "TG": "Togo", "TH": "Thailand",
    "TJ": "Tajikistan", "TK": "Tokelau", "TL": "Timor-Leste",
    "TM": "Turkmenistan", "TN": "Tunisia", "TO": "Tonga", "TR": "Turkey",
    "TT": "Trinidad and Tobago", "TV": "Tuvalu", "TW": "Taiwan",
    "TZ": "Tanzania", "UA": "Ukraine", "UG": "Uganda",
    "UM": "United States Minor Outlying Islands", "US": "United States",
    "UY": "Uruguay", "UZ": "Uzbekistan", "VA": "Vatican",
    "VC": "Saint Vincent and the Grenadines", "VE": "Venezuela",
    "VG": "British Virgin Islands", "VI": "U.S. Virgin Islands",
    "VN": "Vietnam", "VU": "Vanuatu", "WF": "Wallis and Futuna",
    "WS": "Samoa", "XK": "Kosovo", "YE": "Yemen", "YT": "Mayotte",
    "ZA": "South Africa", "ZM": "Zambia", "ZW": "Zimbabwe",
}

# Undirected land borders (each pair once; symmetrized on output).
BORDERS = """
AD-ES AD-FR
AL-GR AL-ME AL-MK AL-RS AL-XK
AT-CH AT-CZ AT-DE AT-HU AT-IT AT-LI AT-SI AT-SK
BA-HR BA-ME BA-RS
BE-DE BE-FR BE-LU BE-NL
BG-GR BG-MK BG-RO BG-RS BG-TR
BY-LT BY-LV BY-PL BY-RU BY-UA
CH-DE CH-FR CH-IT CH-LI
CZ-DE CZ-PL CZ-SK
DE-DK DE-FR DE-LU DE-NL DE-PL
EE-LV EE-RU
ES-FR ES-GI ES-MA ES-PT
FI-NO FI-RU FI-SE
FR-IT FR-LU FR-MC
GB-IE
GR-MK GR-TR
HR-HU HR-ME HR-RS HR-SI
HU-RO HU-RS HU-SI HU-SK HU-UA
IT-SI IT-SM IT-VA
LT-LV LT-PL LT-RU
LV-RU
MD-RO MD-UA
ME-RS ME-XK
MK-RS MK-XK
NO-RU NO-SE
PL-RU PL-SK PL-UA
RO-RS RO-UA
RS-XK
RU-UA
SK-UA
AM-AZ AM-GE AM-IR AM-TR
AZ-GE AZ-IR AZ-RU AZ-TR
GE-RU GE-TR
RU-KZ RU-MN RU-CN RU-KP
AE-OM AE-SA
EG-IL EG-LY EG-PS EG-SD
IL-JO IL-LB IL-PS IL-SY
IQ-IR IQ-JO IQ-KW IQ-SA IQ-SY IQ-TR
IR-PK IR-TM IR-TR IR-AF
JO-PS JO-SA JO-SY
KW-SA
LB-SY
OM-SA OM-YE
QA-SA
SA-YE
SY-TR
AF-CN AF-PK AF-TJ AF-TM AF-UZ
BD-IN BD-MM
BT-CN BT-IN
CN-HK CN-IN CN-KG CN-KP CN-KZ CN-LA CN-MM CN-MN CN-MO CN-NP CN-PK CN-TJ CN-VN
IN-MM IN-NP IN-PK
KG-KZ KG-TJ KG-UZ
KZ-TM KZ-UZ
TJ-UZ
TM-UZ
BN-MY
ID-MY ID-PG ID-TL
KH-LA KH-TH KH-VN
KP-KR
LA-MM LA-TH LA-VN
MM-TH
MY-TH
AO-CD AO-CG AO-NA AO-ZM
BF-BJ BF-CI BF-GH BF-ML BF-NE BF-TG
BI-CD BI-RW BI-TZ
BJ-NE BJ-NG BJ-TG
BW-NA BW-ZA BW-ZM BW-ZW
CD-CF CD-CG CD-RW CD-SS CD-TZ CD-UG CD-ZM
CF-CG CF-CM CF-SD CF-SS CF-TD
CG-CM CG-GA
CI-GH CI-GN CI-LR CI-ML
CM-GA CM-GQ CM-NG CM-TD
DJ-ER DJ-ET DJ-SO
DZ-EH DZ-LY DZ-MA DZ-ML DZ-MR DZ-NE DZ-TN
ER-ET ER-SD
ET-KE ET-SO ET-SS ET-SD
GA-GQ
GH-TG
GM-SN
GN-GW GN-LR GN-ML GN-SL GN-SN
GW-SN
KE-SO KE-SS KE-TZ KE-UG
LR-SL
LS-ZA
LY-NE LY-SD LY-TD LY-TN
MA-EH
ML-MR ML-NE ML-SN
MR-EH MR-SN
MW-MZ MW-TZ MW-ZM
MZ-SZ MZ-TZ MZ-ZA MZ-ZM MZ-ZW
NA-ZA NA-ZM
NE-NG NE-TD
NG-TD
RW-TZ RW-UG
SD-SS SD-TD
SS-UG
SZ-ZA
TZ-UG TZ-ZM
ZM-ZW
AR-BO AR-BR AR-CL AR-PY AR-UY
BO-BR BO-CL BO-PE BO-PY
BR-CO BR-GF BR-GY BR-PE BR-PY BR-SR BR-UY BR-VE
BZ-GT BZ-MX
CA-US
CL-PE
CO-EC CO-PA CO-PE CO-VE
CR-NI CR-PA
DO-HT
EC-PE
GF-SR
GT-HN GT-MX GT-SV
GY-SR GY-VE
HN-NI HN-SV
MF-SX
MX-US
""".split()


def build_adjacency():
    adj = {code: set() for code in COUNTRIES}
    seen = set()
    for pair in BORDERS:
        a, b = pair.split("-")
        assert a in COUNTRIES, f"unknown code {a}"
        assert b in COUNTRIES, f"unknown code {b}"
        assert a != b, pair
        key = tuple(sorted((a, b)))
        assert key not in seen, f"duplicate border {pair}"
        seen.add(key)
        adj[a].add(b)
        adj[b].add(a)
    return adj, len(seen)


def write_countries(path):
    adj, n_borders = build_adjacency()
    n = len(COUNTRIES)
    assert 242 <= n <= 262, f"country roster size {n} out of window"
    directed = 2 * n_borders
    assert 618 <= directed <= 682, (
        f"{n_borders} undirected borders -> {directed} directed pairs, "
        "outside the 650 +/- 5% window"
    )
    lines = [
        "# Pinned geodata snapshot (generated by tools/gen_geonames.py).",
        "# Roster and land borders follow the live dump layout:",
        "# ISO\tISO3\tISO-Numeric\tfips\tCountry\tCapital\tArea(in sq km)\t"
        "Population\tContinent\ttld\tCurrencyCode\tCurrencyName\tPhone\t"
        "Postal Code Format\tPostal Code Regex\tLanguages\tgeonameid\t"
        "neighbours\tEquivalentFipsCode",
    ]
    for i, code in enumerate(sorted(COUNTRIES)):
        name = COUNTRIES[code]
        neighbours = ",".join(sorted(adj[code]))
        cols = [
            code,            # ISO
            code + "X",      # ISO3 (placeholder)
            str(i),          # ISO-Numeric
            "",              # fips
            name,            # Country
            "",              # Capital
            "0",             # Area
            "0",             # Population
            "",              # Continent
            "", "", "", "", "", "", "",  # tld..Languages
            str(6000000 + i),            # geonameid
            neighbours,      # neighbours
            "",              # EquivalentFipsCode
        ]
        lines.append("\t".join(cols))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return n, n_borders


# ---------------------------------------------------------------------------
# Cities: CLUSTERS compact clusters of CLUSTER_SIZE cities each. Every
# intra-cluster distance is <= 2*DISC_RADIUS_KM (well under the 50 km join
# radius) and clusters sit hundreds of km apart, so the ordered positive
# count is exactly CLUSTERS * CLUSTER_SIZE * (CLUSTER_SIZE - 1).
# ---------------------------------------------------------------------------

CLUSTERS = 341
CLUSTER_SIZE = 31
DISC_RADIUS_KM = 20.0
LOW_POP_ROWS = 1500

SYLLABLES = [
    "al", "ben", "car", "dor", "el", "fen", "gar", "hol", "iv", "jor",
    "kel", "lin", "mor", "nor", "ost", "per", "quil", "ros", "sal", "tor",
    "ul", "ver", "wil", "xan", "yor", "zel",
]
SUFFIXES = ["ton", "ville", "burg", "stad", "by", "minster", "field", "port"]


def town_name(rng):
    parts = rng.randrange(2, 4)
    stem = "".join(rng.choice(SYLLABLES) for _ in range(parts))
    return stem.capitalize() + rng.choice(SUFFIXES)


def offset(lat, lon, dx_km, dy_km):
    """Move (lat, lon) by dx_km east and dy_km north on the sphere."""
    km_per_deg_lat = EARTH_RADIUS_KM * math.pi / 180.0
    new_lat = lat + dy_km / km_per_deg_lat
    new_lon = lon + dx_km / (km_per_deg_lat * math.cos(math.radians(lat)))
    return new_lat, new_lon


def haversine(a, b):
    la1, lo1 = map(math.radians, a)
    la2, lo2 = map(math.radians, b)
    h = (math.sin((la2 - la1) / 2) ** 2
         + math.cos(la1) * math.cos(la2) * math.sin((lo2 - lo1) / 2) ** 2)
    return 2 * EARTH_RADIUS_KM * math.asin(math.sqrt(h))


def cluster_centers():
    centers = []
    for lat in range(-60, 61, 10):          # 13 bands, >= 1100 km apart
        for lon in range(-175, 180, 10):    # >= 550 km apart at |lat| = 60
            centers.append((float(lat), float(lon)))
    assert len(centers) >= CLUSTERS
    return centers[:CLUSTERS]


def write_cities(path):
    rng = random.Random(20240605)
    codes = sorted(COUNTRIES)
    rows = []
    gid = 1_000_000
    big = 0
    for c, center in enumerate(cluster_centers()):
        cc = codes[c % len(codes)]
        pts = []
        for i in range(CLUSTER_SIZE):
            r = DISC_RADIUS_KM * math.sqrt(rng.random())
            theta = rng.random() * 2 * math.pi
            lat, lon = offset(center[0], center[1],
                              r * math.cos(theta), r * math.sin(theta))
            pts.append((lat, lon))
            pop = 50_000 + (c * CLUSTER_SIZE + i) * 977 % 1_500_000
            rows.append((gid, town_name(rng), cc, lat, lon, pop))
            gid += 1
            big += 1
        worst = max(haversine(p, q) for p in pts for q in pts)
        assert worst < 48.0, f"cluster {c} spans {worst:.1f} km"
    # Sub-threshold rows the population filter must drop; same clusters.
    centers = cluster_centers()
    for i in range(LOW_POP_ROWS):
        center = centers[i % len(centers)]
        cc = codes[i % len(codes)]
        r = DISC_RADIUS_KM * math.sqrt(rng.random())
        theta = rng.random() * 2 * math.pi
        lat, lon = offset(center[0], center[1],
                          r * math.cos(theta), r * math.sin(theta))
        pop = 500 + (i * 331) % 49_000
        assert pop < 50_000
        rows.append((gid, town_name(rng), cc, lat, lon, pop))
        gid += 1

    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for gid_, name, cc, lat, lon, pop in rows:
            cols = [
                str(gid_),            # geonameid
                name,                 # name
                name,                 # asciiname
                "",                   # alternatenames
                f"{lat:.5f}",         # latitude
                f"{lon:.5f}",         # longitude
                "P",                  # feature class
                "PPL",                # feature code
                cc,                   # country code
                "",                   # cc2
                "", "", "", "",       # admin1..admin4
                str(pop),             # population
                "",                   # elevation
                "0",                  # dem
                "Etc/UTC",            # timezone
                "2024-06-05",         # modification date
            ]
            fh.write("\t".join(cols) + "\n")
    ordered_pairs = CLUSTERS * CLUSTER_SIZE * (CLUSTER_SIZE - 1)
    assert 8986 <= big <= 12158, f"{big} big cities out of window"
    assert 160_479 <= ordered_pairs <= 641_916, ordered_pairs
    return big, len(rows) - big, ordered_pairs


def main():
    os.makedirs(DATA, exist_ok=True)
    n, borders = write_countries(os.path.join(DATA, "countryInfo.txt"))
    big, small, pairs = write_cities(os.path.join(DATA, "cities.txt"))
    print(f"countries: {n} rows, {borders} undirected borders "
          f"({2 * borders} directed pairs)")
    print(f"cities: {big} rows with population >= 50,000 "
          f"(+{small} below threshold), {pairs} ordered in-range pairs")


if __name__ == "__main__":
    main()
