//! Prompt layouts shared by the engine and the deterministic mock backends.

pub const ANSWER_INSTRUCTION: &str = "Answer the question using only the evidence below. \
Reply with the answer value only, copied exactly as it appears in the evidence.";

pub const SUMMARIZE_INSTRUCTION: &str = "Summarize the evidence below so it fits the token budget. \
Keep every number exactly as written and keep the section markers.";

pub const DECIDE_INSTRUCTION: &str = "Choose the retrieval mode for this spreadsheet question. \
Reply with exactly one word: chunk or sql.";

const QUESTION: &str = "Question: ";
const EVIDENCE: &str = "Evidence:\n";
const BUDGET: &str = "Token budget: ";

pub fn answer_prompt(question: &str, context: &str) -> String {
    format!("{ANSWER_INSTRUCTION}\n{QUESTION}{question}\n{EVIDENCE}{context}")
}

pub fn summarize_prompt(context: &str, budget: usize) -> String {
    format!("{SUMMARIZE_INSTRUCTION}\n{BUDGET}{budget}\n{EVIDENCE}{context}")
}

pub fn decide_prompt(question: &str, complexity: f64, flat: bool) -> String {
    format!(
        "{DECIDE_INSTRUCTION}\nSheet complexity score: {complexity}\nSheet is flat: {flat}\n{QUESTION}{question}"
    )
}

/// The question line of an answer or routing prompt.
pub fn question_of(prompt: &str) -> Option<&str> {
    prompt.lines().find_map(|l| l.strip_prefix(QUESTION))
}

/// Everything after the evidence marker.
pub fn evidence_of(prompt: &str) -> Option<&str> {
    prompt.find(EVIDENCE).map(|i| &prompt[i + EVIDENCE.len()..])
}
