use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Structure,
    Reasoning,
    Rca,
    Discovery,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompetencyQuestion {
    pub category: Category,
    pub template_id: String,
    /// Captured variable names and values, in template order.
    pub slots: Vec<String>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnsupportedQuestion {
    pub text: String,
}

#[derive(Debug)]
pub struct Template {
    pub id: &'static str,
    pub category: Category,
    pub arity: usize,
    /// A question this template is expected to match.
    pub example: &'static str,
    pattern: Regex,
}

const VAR: &str = r"([A-Za-z_][A-Za-z0-9_.]*)";
const NUM: &str = r"([-+]?[0-9]+(?:\.[0-9]+)?(?:[eE][-+]?[0-9]+)?|[A-Za-z_][A-Za-z0-9_]*)";
const COUNT: &str = r"(one|two|three|four|five|six|seven|eight|nine|ten|[0-9]+)";
const ANOMALY: &str = r"(?:the )?anomalous value of (?:the )?(?:variable )?";

fn t(id: &'static str, category: Category, example: &'static str, pattern: &str) -> Template {
    let pattern = pattern
        .replace("{V}", VAR)
        .replace("{N}", NUM)
        .replace("{K}", COUNT)
        .replace("{ANOM}", ANOMALY);
    let pattern = Regex::new(&format!("(?i)^{pattern}$")).expect("template regex");
    let arity = pattern.captures_len() - 1;
    Template { id, category, arity, example, pattern }
}

static INVENTORY: LazyLock<Vec<Template>> = LazyLock::new(|| {
    use Category::*;
    vec![
        t("does_cause", Structure, "Does A cause B?", r"does {V} cause {V}"),
        t(
            "causal_relation",
            Structure,
            "Is there a causal relation between A and B (or between B and A)?",
            r"is there (?:a|any) causal relation(?:ship)? between {V} and {V}(?: \(or between {V} and {V}\))?",
        ),
        t(
            "direct_effect_on",
            Structure,
            "What variables have a direct causal effect on B (i.e., causal parents of B)?",
            r"what variables have a direct causal effect on {V}(?: \(i\.?e\.?,? (?:the )?causal parents of {V}\))?",
        ),
        t("causal_parents", Structure, "What are the causal parents of C?", r"what are the (?:causal )?parents of {V}"),
        t("causal_children", Structure, "What are the causal children of A?", r"what are the (?:causal )?children of {V}"),
        t("causal_path", Structure, "What is the causal path from A to C?", r"what is the causal path from {V} to {V}"),
        t(
            "relation_strength",
            Reasoning,
            "What is the strength of the causal relation between A and B?",
            r"what is the strength of the causal relation(?:ship)? between {V} and {V}",
        ),
        t(
            "strongest_effect",
            Reasoning,
            "Which variable has the strongest causal effect on B?",
            r"which variable has the strongest causal effect on {V}",
        ),
        t(
            "intervention",
            Reasoning,
            "If the value of A were set to x, what would be the effect on B?",
            r"if the value of {V} (?:were|was|is) set to (?:value )?{N}, what would be (?:the|its) effect on {V}",
        ),
        t("total_effect", Reasoning, "What is the total effect of A on C?", r"what is the total (?:causal )?effect of {V} on {V}"),
        t(
            "most_likely_root_cause",
            Rca,
            "What is the most likely root cause of the anomalous value of variable B?",
            r"what is the most likely root cause of (?:{ANOM})?{V}",
        ),
        t(
            "strongest_cause",
            Rca,
            "What is the strongest cause of the anomalous value of variable B?",
            r"what is the strongest cause of (?:{ANOM})?{V}",
        ),
        t(
            "top_root_causes",
            Rca,
            "What are the three most likely root causes of the anomalous value of variable B, ranked in descending order?",
            r"what are the {K} most likely root causes of (?:{ANOM})?{V}(?:,? ranked in descending order)?",
        ),
        t(
            "is_likely_root_cause",
            Rca,
            "Is A a likely root cause of the anomalous value of variable B?",
            r"is {V} a likely root cause of (?:{ANOM})?{V}",
        ),
        t(
            "compare_root_causes",
            Rca,
            "Which is more likely to be the root cause: A or D?",
            r"which is more likely to be the root cause:? {V} or {V}",
        ),
        t(
            "why_not_root_cause",
            Rca,
            "Why is D not considered a likely root cause of the anomalous value of variable B?",
            r"why is {V} not (?:considered )?(?:a )?likely (?:a )?root cause of (?:{ANOM})?{V}",
        ),
        t(
            "discovery_algorithm",
            Discovery,
            "What algorithm was used to learn the causal graph?",
            r"what algorithm was used to (?:learn|discover) the causal graph",
        ),
        t(
            "edge_stability",
            Discovery,
            "What is the stability score of the edge A → B?",
            r"what is the stability score of the edge {V} -> {V}",
        ),
        t(
            "least_reliable_edges",
            Discovery,
            "Which edges in the graph are considered the least reliable?",
            r"which edges in the graph are (?:considered )?(?:the )?least reliable",
        ),
        t(
            "bootstrap_iterations",
            Discovery,
            "How many bootstrap iterations were used during causal discovery?",
            r"how many bootstrap (?:iterations|resamples|replicates) were used(?: during causal discovery)?",
        ),
        t("edge_reliability", Discovery, "How reliable is the edge A → B?", r"how reliable is the edge {V} -> {V}"),
        t(
            "retention_thresholds",
            Discovery,
            "What thresholds were used to retain edges?",
            r"what (?:stability )?thresholds? (?:was|were) used to retain edges",
        ),
    ]
});

pub fn inventory() -> &'static [Template] {
    &INVENTORY
}

fn normalize(text: &str) -> String {
    let mut s = text
        .replace(r"\rightarrow", "->")
        .replace(r"\(", "")
        .replace(r"\)", "")
        .replace(['→', '⟶'], "->")
        .replace(['’', '‘'], "'")
        .replace("->", " -> ");
    s = s.split_whitespace().collect::<Vec<_>>().join(" ");
    // `\( x \),` leaves a space before the comma
    s = s.replace(" ,", ",");
    s.trim_end_matches(['?', '.', '!', ' ']).trim().to_string()
}

fn count_word(w: &str) -> String {
    let n = match w.to_lowercase().as_str() {
        "one" => 1,
        "two" => 2,
        "three" => 3,
        "four" => 4,
        "five" => 5,
        "six" => 6,
        "seven" => 7,
        "eight" => 8,
        "nine" => 9,
        "ten" => 10,
        _ => return w.to_string(),
    };
    n.to_string()
}

/// Matches `text` against the template inventory.
pub fn parse_question(text: &str) -> Result<CompetencyQuestion, UnsupportedQuestion> {
    let norm = normalize(text);
    for tpl in inventory() {
        if let Some(c) = tpl.pattern.captures(&norm) {
            let mut slots: Vec<String> = c.iter().skip(1).flatten().map(|m| m.as_str().to_string()).collect();
            match tpl.id {
                "top_root_causes" => slots[0] = count_word(&slots[0]),
                // "(or between B and A)" and "(i.e., causal parents of B)" only restate the pair
                "causal_relation" | "direct_effect_on" => slots.truncate(tpl.arity_core()),
                _ => {}
            }
            return Ok(CompetencyQuestion {
                category: tpl.category,
                template_id: tpl.id.to_string(),
                slots,
                text: text.to_string(),
            });
        }
    }
    Err(UnsupportedQuestion { text: text.to_string() })
}

impl Template {
    /// Slots the answer needs; optional restating groups excluded.
    pub fn arity_core(&self) -> usize {
        match self.id {
            "causal_relation" => 2,
            "direct_effect_on" => 1,
            _ => self.arity,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_example_parses_to_its_own_template() {
        for tpl in inventory() {
            let q = parse_question(tpl.example).unwrap_or_else(|_| panic!("{} did not parse", tpl.example));
            assert_eq!(q.template_id, tpl.id);
            assert_eq!(q.slots.len(), tpl.arity_core(), "{}", tpl.id);
        }
        assert!(inventory().len() >= 19);
    }

    #[test]
    fn examples() {
        let q = parse_question("Does A cause B?").unwrap();
        assert_eq!((q.category, q.template_id.as_str(), q.slots.clone()), (Category::Structure, "does_cause", vec!["A".to_string(), "B".to_string()]));
        let q = parse_question(r"What is the stability score of the edge \( A \rightarrow B \)?").unwrap();
        assert_eq!(q.template_id, "edge_stability");
        assert_eq!(q.slots, vec!["A", "B"]);
        let q = parse_question("what is the stability score of the edge motor_temp->Load?").unwrap();
        assert_eq!(q.slots, vec!["motor_temp", "Load"]);
        assert!(parse_question("What's the weather?").is_err());
        let q = parse_question(r"If the value of A were set to \( x \), what would be the effect on B?").unwrap();
        assert_eq!((q.template_id.as_str(), q.slots.clone()), ("intervention", vec!["A".to_string(), "x".into(), "B".into()]));
    }

    #[test]
    fn slot_details() {
        let q = parse_question("If the value of A were set to 2.5, what would be the effect on B?").unwrap();
        assert_eq!(q.slots, vec!["A", "2.5", "B"]);
        let q = parse_question("What are the three most likely root causes of the anomalous value of variable B, ranked in descending order?").unwrap();
        assert_eq!(q.slots, vec!["3", "B"]);
        let q = parse_question("Why is D not likely a root cause of B?").unwrap();
        assert_eq!((q.template_id.as_str(), q.slots.clone()), ("why_not_root_cause", vec!["D".to_string(), "B".to_string()]));
        let q = parse_question("IS THERE A CAUSAL RELATION BETWEEN a AND z").unwrap();
        assert_eq!(q.slots, vec!["a", "z"]);
    }
}
