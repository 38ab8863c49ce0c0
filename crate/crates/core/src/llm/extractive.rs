use std::collections::HashSet;

use super::prompts;
use crate::text::{content_words, extract_years, stem, words};

/// Fallback answer when the evidence does not single out a value.
pub const UNKNOWN_ANSWER: &str = "UNKNOWN";

#[derive(Debug, Default)]
struct Section<'a> {
    kind: &'a str,
    header: Vec<Vec<&'a str>>,
    rows: Vec<Vec<&'a str>>,
    sql_rows: Vec<Vec<&'a str>>,
}

fn split_cells(line: &str) -> Vec<&str> {
    line.split(" | ").map(str::trim).collect()
}

fn parse_sections(evidence: &str) -> Vec<Section<'_>> {
    let mut out: Vec<Section> = Vec::new();
    for line in evidence.lines() {
        if let Some(rest) = line.strip_prefix("### ") {
            out.push(Section { kind: rest.split_whitespace().next().unwrap_or(""), ..Default::default() });
            continue;
        }
        let Some(sec) = out.last_mut() else { continue };
        if let Some(rest) = line.strip_prefix("row: ") {
            sec.sql_rows.push(split_cells(rest));
        } else if let Some((tag, rest)) = line.split_once(": ") {
            if tag.len() > 1 && tag[1..].chars().all(|c| c.is_ascii_digit()) {
                match tag.as_bytes()[0] {
                    b'h' => sec.header.push(split_cells(rest)),
                    b'r' => sec.rows.push(split_cells(rest)),
                    _ => {}
                }
            }
        }
    }
    out
}

fn is_numeric(cell: &str) -> bool {
    crate::text::parse_number(cell).is_some()
}

fn stems(text: &str) -> HashSet<String> {
    words(text).iter().map(|w| stem(w)).collect()
}

/// Deterministic extraction-style answerer over an answer prompt.
///
/// A SQL result section answers with its values (columns joined by a space,
/// rows by ", "). Otherwise the best block row is the one whose label cells
/// share the most stems with the question (a cell equal to a question year
/// adds one); the column is chosen by year match in the header, then by stem
/// overlap with the column label. The cell text is returned verbatim.
pub fn extractive_answer(prompt: &str) -> String {
    let question = prompts::question_of(prompt).unwrap_or_default();
    let evidence = prompts::evidence_of(prompt).unwrap_or_default();
    let sections = parse_sections(evidence);

    if let Some(sql) = sections.iter().find(|s| s.kind == "sql" && !s.sql_rows.is_empty()) {
        return sql
            .sql_rows
            .iter()
            .map(|r| r.join(" "))
            .collect::<Vec<_>>()
            .join(", ");
    }

    let q_stems: HashSet<String> = content_words(question).iter().map(|w| stem(w)).collect();
    let q_years: Vec<String> = extract_years(question).iter().map(|y| y.year.to_string()).collect();

    let mut best: Option<(usize, &Section, &Vec<&str>, HashSet<usize>)> = None;
    for sec in sections.iter().filter(|s| s.kind == "block") {
        for row in &sec.rows {
            let mut label_cols = HashSet::new();
            let mut overlap = 0;
            let mut year_hit = 0;
            for (c, cell) in row.iter().enumerate() {
                if cell.is_empty() {
                    continue;
                }
                if q_years.iter().any(|y| y == cell) {
                    year_hit = 1;
                    label_cols.insert(c);
                    continue;
                }
                if is_numeric(cell) {
                    continue;
                }
                let n = stems(cell).intersection(&q_stems).count();
                if n > 0 {
                    label_cols.insert(c);
                    overlap += n;
                }
            }
            if overlap == 0 {
                continue;
            }
            let score = overlap + year_hit;
            if best.as_ref().is_none_or(|b| score > b.0) {
                best = Some((score, sec, row, label_cols));
            }
        }
    }
    let Some((_, sec, row, label_cols)) = best else {
        return UNKNOWN_ANSWER.to_string();
    };

    let col_label = |c: usize| -> String {
        sec.header
            .iter()
            .filter_map(|h| h.get(c).copied())
            .filter(|s| !s.is_empty())
            .collect::<Vec<_>>()
            .join(" ")
    };
    let mut pick: Option<(usize, usize)> = None;
    for (c, cell) in row.iter().enumerate() {
        if cell.is_empty() || label_cols.contains(&c) {
            continue;
        }
        let label = col_label(c);
        let mut score = stems(&label).intersection(&q_stems).count();
        if q_years.iter().any(|y| label.contains(y.as_str())) {
            score += 10;
        }
        if is_numeric(cell) {
            score += 1;
        }
        if pick.is_none_or(|p| score > p.1) {
            pick = Some((c, score));
        }
    }
    match pick {
        Some((c, _)) => row[c].to_string(),
        None => UNKNOWN_ANSWER.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn picks_sql_values() {
        let p = prompts::answer_prompt(
            "Which countries?",
            "### sql\nquery: SELECT country FROM t\ncolumns: country\nrow: A\nrow: B\n",
        );
        assert_eq!(extractive_answer(&p), "A, B");
    }

    #[test]
    fn picks_cell_by_row_and_year_column() {
        let ctx = "### block S#0\nh1: Assets |  | \nh2:  | FY2022 | FY2023\nr4: Cash and cash equivalents | 13,576 | 34,704\nr5: Short-term investments | 116,110 | 76,558\n";
        let p = prompts::answer_prompt("What were cash and cash equivalents in FY2023?", ctx);
        assert_eq!(extractive_answer(&p), "34,704");
    }

    #[test]
    fn flat_row_with_year_value() {
        let ctx = "### block T#0\nh1: Country | Year | Fertility Rate\nr2: Country X | 2017 | 2.0\nr3: Country X | 2018 | 1.9\nr4: Country Y | 2018 | 2.4\n";
        let p = prompts::answer_prompt("What was the fertility rate of Country X in 2018?", ctx);
        assert_eq!(extractive_answer(&p), "1.9");
    }

    #[test]
    fn unknown_without_overlap() {
        let ctx = "### block T#0\nh1: a | b\nr2: x | 1\n";
        assert_eq!(extractive_answer(&prompts::answer_prompt("zzz?", ctx)), UNKNOWN_ANSWER);
    }
}
