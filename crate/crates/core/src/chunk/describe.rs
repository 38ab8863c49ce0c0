use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{Block, BlockId, BlockLayout};
use crate::llm::{Gateway, InvocationBudget, ModelRequest, Purpose};

const MAX_CONTENT_LABELS: usize = 6;
const MAX_LABEL_CHARS: usize = 48;

static SENTENCE_END: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[.!?]+(?:\s+|$)").unwrap());

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DescriptionSource {
    Template,
    Model,
}

/// Two-sentence summary of a block, the text that gets embedded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockDescription {
    pub block_id: BlockId,
    pub text: String,
    pub source: DescriptionSource,
}

/// Number of sentences, splitting on terminal punctuation followed by
/// whitespace or end of text. Decimal points do not split.
pub fn sentence_count(text: &str) -> usize {
    SENTENCE_END
        .split(text.trim())
        .filter(|s| !s.trim().is_empty())
        .count()
}

/// Checks the two-sentence shape and that every header label and year
/// appears verbatim.
pub fn validate_description(block: &Block, text: &str) -> Result<(), String> {
    let n = sentence_count(text);
    if n != 2 {
        return Err(format!("expected 2 sentences, found {n}"));
    }
    if let Some(missing) = block.metadata.header_path.iter().find(|l| !text.contains(l.as_str())) {
        return Err(format!("header label {missing:?} missing"));
    }
    if let Some(y) = block
        .metadata
        .year_labels
        .iter()
        .find(|y| !text.contains(&y.year.to_string()))
    {
        return Err(format!("year {} missing", y.year));
    }
    Ok(())
}

fn clean_label(label: &str) -> String {
    let mut s: String = label
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .replace(['!', '?'], "");
    // keep periods only when glued to a following character ("3.5", "U.S")
    while let Some(pos) = s.find(". ") {
        s.replace_range(pos..pos + 1, "");
    }
    let s = s.trim_end_matches('.').to_string();
    if s.chars().count() > MAX_LABEL_CHARS {
        s.chars().take(MAX_LABEL_CHARS).collect::<String>().trim_end().to_string()
    } else {
        s
    }
}

/// Deterministic two-sentence description.
///
/// Sentence one names the header path (outer to inner, joined with " > ") and
/// up to six row labels; sentence two lists the years and the unit.
pub fn describe(block: &Block) -> BlockDescription {
    let meta = &block.metadata;
    let labels: Vec<String> = block
        .content_labels()
        .into_iter()
        .map(clean_label)
        .filter(|l| !l.is_empty() && !meta.header_path.contains(l))
        .take(MAX_CONTENT_LABELS)
        .collect();

    let mut first = if meta.header_path.is_empty() {
        format!(
            "This block covers rows {}\u{2013}{} of sheet {}",
            block.row_range.first + 1,
            block.row_range.last + 1,
            block.sheet_name
        )
    } else if block.layout == BlockLayout::Window {
        format!("This block covers columns {}", meta.header_path.join(", "))
    } else {
        format!("This block covers {}", meta.header_path.join(" > "))
    };
    if !labels.is_empty() {
        first.push_str(", including ");
        first.push_str(&labels.join(", "));
    }
    first.push('.');

    let fiscal = !meta.year_labels.is_empty() && meta.year_labels.iter().all(|y| y.fiscal);
    let years: Vec<String> = meta
        .year_labels
        .iter()
        .map(|y| if fiscal { format!("FY{}", y.year) } else { y.year.to_string() })
        .collect();
    let second = match (years.is_empty(), &meta.unit) {
        (false, Some(u)) => format!(
            "It reports {}years {} in {}.",
            if fiscal { "fiscal " } else { "" },
            years.join(", "),
            u
        ),
        (false, None) => format!(
            "It reports {}years {}.",
            if fiscal { "fiscal " } else { "" },
            years.join(", ")
        ),
        (true, Some(u)) => format!("It reports values in {u}."),
        (true, None) => "No year or unit labels were detected.".to_string(),
    };

    BlockDescription {
        block_id: block.block_id.clone(),
        text: format!("{first} {second}"),
        source: DescriptionSource::Template,
    }
}

fn describe_prompt(block: &Block) -> String {
    let meta = &block.metadata;
    let years: Vec<String> = meta.year_labels.iter().map(|y| y.year.to_string()).collect();
    format!(
        "Write exactly two sentences describing this spreadsheet block. \
         The first sentence names the header path and what the block contains; \
         the second lists the years and units present. \
         Repeat every header label and year verbatim.\n\
         Header path: {}\nYears: {}\nUnit: {}\nRows:\n{}",
        meta.header_path.join(" > "),
        years.join(", "),
        meta.unit.as_deref().unwrap_or("none"),
        block.render()
    )
}

/// Model-written description, validated like the template and replaced by
/// it on any violation or backend failure.
pub fn describe_with_model(block: &Block, gateway: &Gateway, budget: &mut InvocationBudget) -> BlockDescription {
    let req = ModelRequest::new(Purpose::Describe, describe_prompt(block), 160);
    match gateway.complete(&req, budget) {
        Ok(resp) => {
            let text = resp.text.trim();
            if validate_description(block, text).is_ok() {
                return BlockDescription {
                    block_id: block.block_id.clone(),
                    text: text.to_string(),
                    source: DescriptionSource::Model,
                };
            }
            describe(block)
        }
        Err(_) => describe(block),
    }
}
