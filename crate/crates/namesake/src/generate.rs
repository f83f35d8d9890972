//! Generation-stage bridge: render the answer-selection prompt from the
//! ranked documents, call a generation backend over a thin wire contract,
//! and parse the tagged completion into a structured outcome.
//!
//! The prompt names every included knowledge-graph subject, embeds the
//! anchor question twice (once introducing the extracts, once asking for
//! the answer), concatenates the document extracts in the configured
//! ordering, and closes with the fixed instruction block that demands
//! `<CHOICE>`/`<ANSWER>` tags and shows a worked example.

use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::search::RetryPolicy;
use crate::toponym::AnchorQuestion;
use crate::util::sha256_hex;

/// Default context budget, in backend tokens.
pub const DEFAULT_TOKEN_BUDGET: usize = 4096;

/// Worked example shown at the end of the instruction block.
pub const DEFAULT_IN_CONTEXT_EXAMPLE: &str = "For example, to \"Who is Rue Madame Curie in Beirut, Lebanon named after?\", write: \"<CHOICE> [write_here_your_chosen_source] </CHOICE> <ANSWER> Marie Curie </ANSWER> Based on the provided information, ...\"";

/// How document extracts are ordered in the prompt body.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocOrdering {
    /// Increasing similarity: rank k first, rank 1 last — the most
    /// relevant extract sits at the tail, closest to the instructions.
    TailBest,
    /// Decreasing rank: rank 1 first, rank k last.
    HeadBest,
}

impl FromStr for DocOrdering {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "tail-best" => Ok(DocOrdering::TailBest),
            "head-best" => Ok(DocOrdering::HeadBest),
            other => Err(Error::Config(format!(
                "unknown ordering {other:?}; expected tail-best or head-best"
            ))),
        }
    }
}

/// One ranked candidate with its document text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateDoc {
    pub subject: String,
    pub text: String,
    pub score: f64,
    /// 1-based rank from the ranker (1 = most relevant).
    pub rank: usize,
}

#[derive(Debug, Clone)]
pub struct PromptSpec {
    pub anchor: AnchorQuestion,
    pub candidates: Vec<CandidateDoc>,
    pub ordering: DocOrdering,
    pub token_budget: usize,
    pub in_context_example: String,
}

impl PromptSpec {
    pub fn new(anchor: AnchorQuestion, candidates: Vec<CandidateDoc>, ordering: DocOrdering) -> Self {
        PromptSpec {
            anchor,
            candidates,
            ordering,
            token_budget: DEFAULT_TOKEN_BUDGET,
            in_context_example: DEFAULT_IN_CONTEXT_EXAMPLE.to_string(),
        }
    }
}

/// Rendered prompt plus the bookkeeping needed for reproducibility.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssembledPrompt {
    pub text: String,
    pub token_count: usize,
    /// Subjects actually included, in prompt order.
    pub included_subjects: Vec<String>,
    /// Ranks dropped to satisfy the budget, in drop order (least relevant
    /// first).
    pub dropped_ranks: Vec<usize>,
}

fn render(included: &[&CandidateDoc], spec: &PromptSpec) -> String {
    let names: Vec<&str> = included.iter().map(|c| c.subject.as_str()).collect();
    let names = names.join(", ");
    let extracts: Vec<&str> = included.iter().map(|c| c.text.as_str()).collect();
    let extracts = extracts.join("\n");
    let q = &spec.anchor.text;
    let instructions = format!(
        "Only use the provided information. First, choose the extract that best allows you to \
         answer among: {names}. Delimit your chosen answer with the tags <CHOICE> </CHOICE>. \
         Second, give your answer by delimiting it with the tags <ANSWER> </ANSWER>. Your answer \
         should be concise. If it is a person, I need the first name and the last name. {example}",
        example = spec.in_context_example,
    );
    format!(
        "For {n} knowledge graphs, an extract from the RDF/XML file is provided; the names of \
         the knowledge graphs are: {names}. We want to find an answer to: \"{q}\". These are the \
         extracts:\n{extracts}\". Give me a simple answer to \"{q}\". {instructions}",
        n = included.len(),
    )
}

/// Render the prompt under the token budget. Whole documents are dropped
/// from the least-relevant end (highest rank number) until the rendered
/// prompt fits; a document is never cut mid-text. `count` measures text in
/// backend tokens.
pub fn assemble_prompt(
    spec: &PromptSpec,
    count: &dyn Fn(&str) -> usize,
) -> Result<AssembledPrompt> {
    if spec.candidates.is_empty() {
        return Err(Error::Config("assemble_prompt requires at least one candidate".into()));
    }
    // Prompt order for the full set.
    let mut ordered: Vec<&CandidateDoc> = spec.candidates.iter().collect();
    match spec.ordering {
        DocOrdering::TailBest => ordered.sort_by(|a, b| b.rank.cmp(&a.rank)),
        DocOrdering::HeadBest => ordered.sort_by(|a, b| a.rank.cmp(&b.rank)),
    }

    let mut dropped_ranks = Vec::new();
    loop {
        let text = render(&ordered, spec);
        let token_count = count(&text);
        if token_count <= spec.token_budget {
            return Ok(AssembledPrompt {
                text,
                token_count,
                included_subjects: ordered.iter().map(|c| c.subject.clone()).collect(),
                dropped_ranks,
            });
        }
        if ordered.len() == 1 {
            return Err(Error::BudgetUnsatisfiable {
                budget: spec.token_budget,
                needed: token_count,
            });
        }
        // Drop the least relevant remaining document.
        let (drop_idx, _) = ordered
            .iter()
            .enumerate()
            .max_by_key(|(_, c)| c.rank)
            .expect("non-empty");
        dropped_ranks.push(ordered.remove(drop_idx).rank);
    }
}

/// Decoding parameters passed through to the backend.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub max_new_tokens: usize,
    pub temperature: f64,
    pub seed: u64,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams { max_new_tokens: 256, temperature: 0.0, seed: 0 }
    }
}

/// Where completions come from: an HTTP endpoint speaking
/// `{prompt, max_new_tokens, temperature, seed} -> {text}`, or a local
/// executable fed the same request on stdin and answering on stdout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GeneratorBackend {
    Http(String),
    Script(PathBuf),
}

impl FromStr for GeneratorBackend {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if let Some(path) = s.strip_prefix("script:") {
            if path.is_empty() {
                return Err(Error::Config("script backend needs a path".into()));
            }
            return Ok(GeneratorBackend::Script(PathBuf::from(path)));
        }
        if s.starts_with("http://") || s.starts_with("https://") {
            return Ok(GeneratorBackend::Http(s.to_string()));
        }
        Err(Error::Config(format!(
            "unknown generator backend {s:?}; expected http(s)://... or script:<path>"
        )))
    }
}

#[derive(Debug, Serialize)]
struct GenRequest<'a> {
    prompt: &'a str,
    max_new_tokens: usize,
    temperature: f64,
    seed: u64,
}

#[derive(Debug, Deserialize)]
struct GenResponse {
    text: Option<String>,
    error: Option<String>,
}

/// A completed backend call, with content hashes of both sides so runs can
/// be audited and replayed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub text: String,
    pub prompt_sha256: String,
    pub response_sha256: String,
}

fn interpret_response(body: GenResponse) -> Result<String> {
    if let Some(error) = body.error {
        let lower = error.to_lowercase();
        if lower.contains("context") && lower.contains("overflow") {
            return Err(Error::ContextOverflow);
        }
        return Err(Error::Http(format!("backend error: {error}")));
    }
    body.text.ok_or_else(|| {
        Error::MalformedResponse("generator response has neither text nor error".into())
    })
}

/// Call the generation backend. HTTP transport failures and 429/5xx are
/// retried per `policy`; HTTP 413 and backend-reported context overflows
/// surface as `ContextOverflow`.
pub fn call_generator(
    backend: &GeneratorBackend,
    prompt: &str,
    params: &GenParams,
    policy: &RetryPolicy,
) -> Result<GenerationRecord> {
    let request = GenRequest {
        prompt,
        max_new_tokens: params.max_new_tokens,
        temperature: params.temperature,
        seed: params.seed,
    };
    let raw = match backend {
        GeneratorBackend::Http(url) => http_call(url, &request, policy)?,
        GeneratorBackend::Script(path) => script_call(path, &request)?,
    };
    let body: GenResponse = serde_json::from_str(&raw)
        .map_err(|e| Error::MalformedResponse(format!("generator response: {e}")))?;
    let text = interpret_response(body)?;
    Ok(GenerationRecord {
        text,
        prompt_sha256: sha256_hex(prompt.as_bytes()),
        response_sha256: sha256_hex(raw.as_bytes()),
    })
}

fn http_call(url: &str, request: &GenRequest<'_>, policy: &RetryPolicy) -> Result<String> {
    let mut backoff = policy.initial_backoff_ms;
    let mut last_err = String::new();
    for attempt in 0..policy.max_attempts.max(1) {
        if attempt > 0 {
            std::thread::sleep(std::time::Duration::from_millis(backoff));
            backoff = backoff.saturating_mul(2);
        }
        let result = ureq::post(url).send_json(request);
        match result {
            Ok(mut response) => {
                return response
                    .body_mut()
                    .read_to_string()
                    .map_err(|e| Error::Http(format!("reading generator response: {e}")));
            }
            Err(ureq::Error::StatusCode(413)) => return Err(Error::ContextOverflow),
            Err(ureq::Error::StatusCode(code)) if code == 429 || code >= 500 => {
                last_err = format!("generator returned status {code}");
            }
            Err(ureq::Error::StatusCode(code)) => {
                return Err(Error::Http(format!("generator returned status {code}")));
            }
            Err(e) => {
                last_err = format!("generator transport error: {e}");
            }
        }
    }
    Err(Error::Http(format!(
        "{last_err} (after {} attempts)",
        policy.max_attempts.max(1)
    )))
}

fn script_call(path: &std::path::Path, request: &GenRequest<'_>) -> Result<String> {
    let mut child = Command::new(path)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| Error::io(path, e))?;
    let payload = serde_json::to_vec(request)?;
    {
        use std::io::Write;
        let stdin = child.stdin.as_mut().expect("piped stdin");
        // A script may exit (or fail) without draining stdin; the exit
        // status below is the real signal, so a broken pipe here is not.
        if let Err(e) = stdin.write_all(&payload) {
            if e.kind() != std::io::ErrorKind::BrokenPipe {
                return Err(Error::io(path, e));
            }
        }
    }
    let output = child.wait_with_output().map_err(|e| Error::io(path, e))?;
    if !output.status.success() {
        return Err(Error::Backend(format!(
            "generator script {} exited with {}: {}",
            path.display(),
            output.status,
            String::from_utf8_lossy(&output.stderr).trim()
        )));
    }
    String::from_utf8(output.stdout)
        .map_err(|e| Error::MalformedResponse(format!("generator script output: {e}")))
}

/// Parsed completion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenOutcome {
    pub choice_subject: Option<String>,
    pub answer_text: Option<String>,
    pub raw: String,
    /// The completion declines with the known refusal phrasing.
    pub refusal: bool,
    /// A choice was given but names none of the listed candidates.
    pub off_list: bool,
}

/// Case-insensitive ASCII substring search starting at `from`.
fn find_ci(haystack: &str, needle: &str, from: usize) -> Option<usize> {
    let h = haystack.as_bytes();
    let n = needle.as_bytes();
    if n.is_empty() || from + n.len() > h.len() {
        return None;
    }
    (from..=h.len() - n.len()).find(|&i| h[i..i + n.len()].eq_ignore_ascii_case(n))
}

/// First well-formed `<TAG>…</TAG>` span, trimmed. Tags match
/// case-insensitively; a missing or unclosed tag yields `None`.
fn extract_tag(raw: &str, tag: &str) -> Option<String> {
    let open = format!("<{tag}>");
    let close = format!("</{tag}>");
    let start = find_ci(raw, &open, 0)?;
    let content_start = start + open.len();
    let end = find_ci(raw, &close, content_start)?;
    Some(raw[content_start..end].trim().to_string())
}

fn normalize_for_match(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Total parser for completions: extracts the first `<CHOICE>` and
/// `<ANSWER>` spans, detects the refusal phrasing, and flags choices that
/// name no listed candidate. Never fails.
pub fn parse_generation(raw: &str, candidate_subjects: &[String]) -> GenOutcome {
    let choice_subject = extract_tag(raw, "CHOICE");
    let answer_text = extract_tag(raw, "ANSWER");
    let refusal = find_ci(raw, "no relevant information", 0).is_some();
    let off_list = match &choice_subject {
        Some(choice) => {
            let normalized = normalize_for_match(choice);
            !candidate_subjects.iter().any(|s| normalize_for_match(s) == normalized)
        }
        None => false,
    };
    GenOutcome {
        choice_subject,
        answer_text,
        raw: raw.to_string(),
        refusal,
        off_list,
    }
}
