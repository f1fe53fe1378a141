//! Tokenizer and keyword/slot grammar.

use super::{Intent, IntentName, Slots};

const NUMBER_WORDS: [&str; 20] = [
    "one",
    "two",
    "three",
    "four",
    "five",
    "six",
    "seven",
    "eight",
    "nine",
    "ten",
    "eleven",
    "twelve",
    "thirteen",
    "fourteen",
    "fifteen",
    "sixteen",
    "seventeen",
    "eighteen",
    "nineteen",
    "twenty",
];

/// Lowercases, drops apostrophes, keeps hyphens inside words, splits on
/// everything else and maps number words up to twenty to digits.
pub fn normalize(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.to_lowercase().chars().collect();
    let mut cleaned = String::with_capacity(chars.len());
    for (i, &c) in chars.iter().enumerate() {
        if c.is_alphanumeric() {
            cleaned.push(c);
        } else if c == '\'' || c == '\u{2019}' {
            continue;
        } else if c == '-'
            && i > 0
            && chars[i - 1].is_alphanumeric()
            && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric())
        {
            cleaned.push(c);
        } else {
            cleaned.push(' ');
        }
    }
    cleaned
        .split_whitespace()
        .map(|t| match NUMBER_WORDS.iter().position(|w| *w == t) {
            Some(i) => (i + 1).to_string(),
            None => t.to_string(),
        })
        .collect()
}

fn find_seq(tokens: &[String], needle: &[String]) -> Option<usize> {
    if needle.is_empty() || needle.len() > tokens.len() {
        return None;
    }
    tokens.windows(needle.len()).position(|w| w == needle)
}

/// `<keyword> N` anywhere in the tokens.
fn numbered(tokens: &[String], keywords: &[&str]) -> Option<u8> {
    tokens.windows(2).find(|w| keywords.contains(&w[0].as_str())).and_then(|w| w[1].parse().ok())
}

/// Longest known name whose tokens appear in order.
fn by_name(tokens: &[String], names: &[(u8, String)]) -> Option<u8> {
    names
        .iter()
        .map(|(id, name)| (*id, normalize(name)))
        .filter(|(_, n)| find_seq(tokens, n).is_some())
        .max_by_key(|(id, n)| (n.len(), std::cmp::Reverse(*id)))
        .map(|(id, _)| id)
}

pub fn extract_slots(tokens: &[String], vehicles: &[(u8, String)], objectives: &[(u8, String)]) -> Slots {
    Slots {
        vehicle: numbered(tokens, &["vehicle", "auv"]).or_else(|| by_name(tokens, vehicles)),
        objective: numbered(tokens, &["objective"]).or_else(|| by_name(tokens, objectives)),
    }
}

const NEGATIONS: [&str; 8] = ["not", "isnt", "didnt", "wasnt", "doesnt", "arent", "hasnt", "wont"];

fn name_for(tokens: &[String], has_objective: bool) -> IntentName {
    let has = |w: &str| tokens.iter().any(|t| t == w);
    let any = |ws: &[&str]| ws.iter().any(|w| has(w));
    let phrase = |ws: &[&str]| tokens.windows(ws.len()).any(|w| w.iter().zip(ws).all(|(a, b)| a == b));

    if let Some(why) = tokens.iter().position(|t| t == "why") {
        return if tokens[why + 1..].iter().any(|t| NEGATIONS.contains(&t.as_str())) {
            IntentName::ExplainWhyNot
        } else {
            IntentName::ExplainWhy
        };
    }
    if any(&["abort", "recall"]) || (has("return") && has("recovery")) {
        return IntentName::CmdAbort;
    }
    if has("start") && has("mission") {
        return IntentName::CmdStartMission;
    }
    if has("eta")
        || phrase(&["how", "long"])
        || (has("when") && any(&["finish", "finished", "done", "complete", "back"]))
    {
        return IntentName::QueryEta;
    }
    if (has_objective || any(&["objective", "survey"]))
        && any(&["status", "progress", "done", "complete", "completed", "finished"])
    {
        return IntentName::QueryObjectiveStatus;
    }
    if has("progress") || phrase(&["how", "far"]) || (has("mission") && has("going")) {
        return IntentName::QueryMissionProgress;
    }
    if any(&["battery", "charge"]) || (has("power") && has("left")) {
        return IntentName::QueryBattery;
    }
    if any(&["speed", "fast"]) {
        return IntentName::QuerySpeed;
    }
    if any(&["depth", "deep"]) {
        return IntentName::QueryDepth;
    }
    if any(&["where", "position", "location"]) {
        return IntentName::QueryPosition;
    }
    if any(&["status", "doing", "state"]) {
        return IntentName::QueryStatus;
    }
    if has("assets") || (any(&["list", "which", "what"]) && has("vehicles")) {
        return IntentName::ListVehicles;
    }
    if has("help") || phrase(&["what", "can"]) {
        return IntentName::Help;
    }
    IntentName::Fallback
}

pub fn parse_utterance(tokens: &[String], vehicles: &[(u8, String)], objectives: &[(u8, String)]) -> Intent {
    let slots = extract_slots(tokens, vehicles, objectives);
    Intent { name: name_for(tokens, slots.objective.is_some()), slots }
}
