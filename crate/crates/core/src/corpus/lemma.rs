use std::collections::HashMap;

use super::CorpusError;

const BUNDLED_LEMMAS: &str = include_str!("../../data/lemmas_en.tsv");

/// Post-processing applied to a stem after a suffix is stripped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Repair {
    None,
    /// `runn` -> `run`, but `fill`, `dress`, `buzz` are left alone.
    Undouble,
}

/// Strip `suffix` and append `replacement`. A rule whose replacement equals
/// its suffix is a guard: it matches, and the token is returned unchanged.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuffixRule {
    pub suffix: String,
    pub replacement: String,
    /// Minimum stem length left after stripping the suffix.
    pub min_stem: usize,
    /// Stem must contain a vowel (a, e, i, o, u, y).
    pub needs_vowel: bool,
    pub repair: Repair,
}

impl SuffixRule {
    fn new(suffix: &str, replacement: &str, min_stem: usize, needs_vowel: bool, repair: Repair) -> Self {
        Self {
            suffix: suffix.into(),
            replacement: replacement.into(),
            min_stem,
            needs_vowel,
            repair,
        }
    }

    fn guard(suffix: &str) -> Self {
        Self::new(suffix, suffix, 0, false, Repair::None)
    }

    fn apply(&self, token: &str) -> Option<String> {
        let stem = token.strip_suffix(self.suffix.as_str())?;
        if self.replacement == self.suffix {
            return Some(token.to_string());
        }
        if stem.len() < self.min_stem.max(1) {
            return None;
        }
        if self.needs_vowel && !stem.bytes().any(|b| b"aeiouy".contains(&b)) {
            return None;
        }
        let mut out = stem.to_string();
        if self.repair == Repair::Undouble {
            let b = out.as_bytes();
            let n = b.len();
            if n >= 3 && b[n - 1] == b[n - 2] && !b"aeiouylsz".contains(&b[n - 1]) {
                out.pop();
            }
        }
        out.push_str(&self.replacement);
        Some(out)
    }
}

/// Dictionary lemmatizer: exact lookup first, then the first suffix rule
/// that matches, otherwise identity.
#[derive(Debug, Clone)]
pub struct LemmaTable {
    exact: HashMap<String, String>,
    rules: Vec<SuffixRule>,
}

impl LemmaTable {
    pub fn new(exact: HashMap<String, String>, rules: Vec<SuffixRule>) -> Self {
        Self { exact, rules }
    }

    /// The shipped `inflected<TAB>lemma` table with [`LemmaTable::default_rules`].
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_LEMMAS).expect("bundled lemma table is well formed")
    }

    pub fn bundled_source() -> &'static str {
        BUNDLED_LEMMAS
    }

    pub fn parse(text: &str) -> Result<Self, CorpusError> {
        let mut exact = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |message: &str| CorpusError::Table {
                table: "lemma",
                line: i + 1,
                message: message.to_string(),
            };
            let (form, lemma) = line.split_once('\t').ok_or_else(|| bad("expected inflected<TAB>lemma"))?;
            let valid = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_lowercase());
            if !valid(form) || !valid(lemma) {
                return Err(bad("entries must be non-empty lowercase ascii words"));
            }
            exact.insert(form.to_string(), lemma.to_string());
        }
        Ok(Self::new(exact, Self::default_rules()))
    }

    pub fn default_rules() -> Vec<SuffixRule> {
        use Repair::*;
        vec![
            SuffixRule::new("sses", "ss", 1, false, None),
            SuffixRule::new("ies", "y", 2, false, None),
            SuffixRule::new("shes", "sh", 1, false, None),
            SuffixRule::new("ches", "ch", 1, false, None),
            SuffixRule::new("xes", "x", 1, false, None),
            SuffixRule::new("zes", "z", 1, false, None),
            SuffixRule::guard("ss"),
            SuffixRule::guard("us"),
            SuffixRule::guard("is"),
            SuffixRule::new("s", "", 3, true, None),
            SuffixRule::guard("eed"),
            SuffixRule::new("ied", "y", 2, false, None),
            SuffixRule::new("ed", "", 3, true, Undouble),
            SuffixRule::new("ing", "", 3, true, Undouble),
        ]
    }

    pub fn len(&self) -> usize {
        self.exact.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exact.is_empty()
    }

    pub fn rules(&self) -> &[SuffixRule] {
        &self.rules
    }

    pub fn lemmatize(&self, token: &str) -> String {
        if let Some(lemma) = self.exact.get(token) {
            return lemma.clone();
        }
        self.rules
            .iter()
            .find_map(|rule| rule.apply(token))
            .unwrap_or_else(|| token.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_and_rule_examples() {
        let t = LemmaTable::bundled();
        assert_eq!(t.lemmatize("running"), "run");
        assert_eq!(t.lemmatize("ran"), "run");
        assert_eq!(t.lemmatize("syrupy"), "syrupy");
    }

    #[test]
    fn suffix_rules() {
        let t = LemmaTable::new(HashMap::new(), LemmaTable::default_rules());
        assert_eq!(t.lemmatize("berries"), "berry");
        assert_eq!(t.lemmatize("notes"), "note");
        assert_eq!(t.lemmatize("peaches"), "peach");
        assert_eq!(t.lemmatize("glasses"), "glass");
        assert_eq!(t.lemmatize("glass"), "glass");
        assert_eq!(t.lemmatize("citrus"), "citrus");
        assert_eq!(t.lemmatize("stopped"), "stop");
        assert_eq!(t.lemmatize("lingering"), "linger");
        assert_eq!(t.lemmatize("filling"), "fill");
        assert_eq!(t.lemmatize("toasted"), "toast");
        assert_eq!(t.lemmatize("dried"), "dry");
        // too short or vowel-less stems fall through unchanged
        assert_eq!(t.lemmatize("string"), "string");
        assert_eq!(t.lemmatize("red"), "red");
        assert_eq!(t.lemmatize("gas"), "gas");
        assert_eq!(t.lemmatize("s"), "s");
    }

    #[test]
    fn exact_lookup_precedes_rules() {
        let mut exact = HashMap::new();
        exact.insert("notes".to_string(), "notes".to_string());
        let t = LemmaTable::new(exact, LemmaTable::default_rules());
        assert_eq!(t.lemmatize("notes"), "notes");
    }

    #[test]
    fn bundled_table_protects_domain_terms() {
        let t = LemmaTable::bundled();
        for w in ["brisk", "crisply", "drying", "gentle", "juicy", "round", "satiny", "syrupy", "velvety", "this", "has"] {
            let l = t.lemmatize(w);
            assert!(!l.is_empty());
            if w != "has" {
                assert_eq!(l, w);
            }
        }
        assert!(t.len() > 500);
    }

    #[test]
    fn rules_never_produce_empty() {
        let t = LemmaTable::new(HashMap::new(), LemmaTable::default_rules());
        for w in ["s", "es", "ies", "ed", "ing", "ss", "us", "sses", "xes", "ied", "eed"] {
            assert!(!t.lemmatize(w).is_empty(), "{w}");
        }
    }

    #[test]
    fn parse_rejects_bad_lines() {
        assert!(LemmaTable::parse("running run\n").is_err());
        assert!(LemmaTable::parse("Running\trun\n").is_err());
        assert!(LemmaTable::parse("# comment\nrunning\trun\n").is_ok());
    }
}
