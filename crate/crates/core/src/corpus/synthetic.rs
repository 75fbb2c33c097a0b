//! Seeded generator of restaurant-style record/description pairs.
//!
//! Each description is rendered from one of several sentence patterns. A
//! pattern fixes the order in which fields are mentioned and the phrase used
//! for each one, so two descriptions of the same record can differ sharply in
//! wording and structure while expressing exactly the same values.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{tokenize, CorpusError, CorpusPair, Entry, Record};

pub const PATTERN_SET_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct FieldSpec {
    pub name: String,
    pub values: Vec<String>,
    /// Present in every generated record.
    pub required: bool,
}

/// A clause realizing one field; `template` holds exactly one `{field}` slot.
#[derive(Clone, Debug, PartialEq)]
pub struct Clause {
    pub field: String,
    pub template: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Pattern {
    pub name: String,
    pub clauses: Vec<Clause>,
    pub joiner: String,
    pub closing: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub fields: Vec<FieldSpec>,
    pub patterns: Vec<Pattern>,
    pub min_fields: usize,
    pub max_fields: usize,
    pub pairs: usize,
    pub seed: u64,
    pub version: u32,
}

fn values(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn pattern(name: &str, joiner: &str, closing: &str, clauses: &[(&str, &str)]) -> Pattern {
    Pattern {
        name: name.into(),
        joiner: joiner.into(),
        closing: closing.into(),
        clauses: clauses
            .iter()
            .map(|(f, t)| Clause {
                field: f.to_string(),
                template: t.to_string(),
            })
            .collect(),
    }
}

const VENUES: [&str; 16] = [
    "cocum",
    "strada",
    "zizzi",
    "the_golden_curry",
    "cafe_rouge",
    "the_eagle",
    "aromi",
    "the_punter",
    "wildwood",
    "loch_fyne",
    "the_mill",
    "giraffe",
    "alimentum",
    "bibimbap_house",
    "the_vaults",
    "clowns",
];

impl SyntheticSpec {
    /// Eight restaurant fields, six patterns, 3 to 8 fields per record.
    pub fn restaurant(pairs: usize, seed: u64) -> Self {
        let fields = vec![
            FieldSpec { name: "name".into(), values: values(&VENUES), required: true },
            FieldSpec {
                name: "eatType".into(),
                values: values(&["coffee_shop", "restaurant", "pub"]),
                required: false,
            },
            FieldSpec {
                name: "food".into(),
                values: values(&["italian", "french", "japanese", "chinese", "english", "indian", "fast_food"]),
                required: false,
            },
            FieldSpec {
                name: "priceRange".into(),
                values: values(&["cheap", "moderate", "expensive", "less_than_£20", "£20-25", "more_than_£30"]),
                required: false,
            },
            FieldSpec {
                name: "customerRating".into(),
                values: values(&["low", "average", "high", "1_out_of_5", "3_out_of_5", "5_out_of_5"]),
                required: false,
            },
            FieldSpec {
                name: "area".into(),
                values: values(&["riverside", "city_centre"]),
                required: false,
            },
            FieldSpec {
                name: "familyFriendly".into(),
                values: values(&["family_friendly", "not_family_friendly"]),
                required: false,
            },
            FieldSpec { name: "near".into(), values: values(&VENUES), required: false },
        ];
        let patterns = vec![
            pattern("descriptive", "", ".", &[
                ("name", "{name} is a venue"),
                ("eatType", "of the {eatType} kind"),
                ("food", "serving {food} food"),
                ("priceRange", "with {priceRange} prices"),
                ("area", "in the {area} area"),
                ("near", "close to {near}"),
                ("customerRating", "rated {customerRating}"),
                ("familyFriendly", "and it is {familyFriendly}"),
            ]),
            pattern("looking-for", "", ".", &[
                ("food", "looking for {food} food ?"),
                ("near", "near {near} ?"),
                ("name", "come try {name} ,"),
                ("customerRating", "which has a {customerRating} customer rating"),
                ("priceRange", "and is priced {priceRange}"),
                ("eatType", "as a {eatType}"),
                ("area", "by the {area}"),
                ("familyFriendly", "and is {familyFriendly}"),
            ]),
            pattern("there-is", "", ".", &[
                ("area", "along the {area}"),
                ("near", "near {near} ,"),
                ("food", "there is a {food} place"),
                ("eatType", "styled as {eatType}"),
                ("name", "called {name} ."),
                ("customerRating", "it has a {customerRating} customer rating"),
                ("familyFriendly", "since it is {familyFriendly}"),
                ("priceRange", "with prices of {priceRange}"),
            ]),
            pattern("at-name", ",", "!", &[
                ("name", "at {name}"),
                ("food", "you get {food} dishes"),
                ("priceRange", "for {priceRange}"),
                ("customerRating", "reviewers say {customerRating}"),
                ("eatType", "in a {eatType} setting"),
                ("familyFriendly", "which is {familyFriendly}"),
                ("area", "over in {area}"),
                ("near", "just by {near}"),
            ]),
            pattern("priced", "", ".", &[
                ("priceRange", "priced {priceRange} ,"),
                ("food", "the {food} cuisine of"),
                ("name", "{name}"),
                ("area", "awaits in {area}"),
                ("near", "beside {near}"),
                ("eatType", "as a fine {eatType}"),
                ("familyFriendly", "being {familyFriendly}"),
                ("customerRating", "with a {customerRating} score"),
            ]),
            pattern("rated", "", ".", &[
                ("customerRating", "with a {customerRating} rating ,"),
                ("name", "{name} sits"),
                ("near", "not far from {near}"),
                ("food", "offering {food} meals"),
                ("priceRange", "at {priceRange}"),
                ("eatType", "in {eatType} form"),
                ("area", "around {area}"),
                ("familyFriendly", "and stays {familyFriendly}"),
            ]),
        ];
        SyntheticSpec {
            fields,
            patterns,
            min_fields: 3,
            max_fields: 8,
            pairs,
            seed,
            version: PATTERN_SET_VERSION,
        }
    }

    pub fn target_mean_fields(&self) -> f64 {
        (self.min_fields + self.max_fields) as f64 / 2.0
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let bad = |msg: String| Err(CorpusError::InvalidSpec(msg));
        if self.fields.is_empty() || self.patterns.is_empty() {
            return bad("spec needs fields and patterns".into());
        }
        let required = self.fields.iter().filter(|f| f.required).count();
        if self.min_fields < required.max(1) || self.min_fields > self.max_fields || self.max_fields > self.fields.len() {
            return bad(format!("field count range {}..={} is not satisfiable", self.min_fields, self.max_fields));
        }
        for f in &self.fields {
            if f.values.is_empty() {
                return bad(format!("field {} has no values", f.name));
            }
            if f.values.iter().any(|v| v.is_empty() || v.chars().any(char::is_whitespace)) {
                return bad(format!("field {} has a non-token value", f.name));
            }
        }
        for p in &self.patterns {
            for f in &self.fields {
                let n = p.clauses.iter().filter(|c| c.field == f.name).count();
                if n != 1 {
                    return bad(format!("pattern {} must realize field {} once", p.name, f.name));
                }
            }
            for c in &p.clauses {
                if !self.fields.iter().any(|f| f.name == c.field) {
                    return bad(format!("pattern {} names unknown field {}", p.name, c.field));
                }
                let slot = format!("{{{}}}", c.field);
                if c.template.matches(&slot).count() != 1 || c.template.matches('{').count() != 1 {
                    return bad(format!("clause {:?} must hold exactly the slot {slot}", c.template));
                }
            }
        }
        Ok(())
    }
}

fn render(pattern: &Pattern, record: &Record) -> String {
    let clauses: Vec<String> = pattern
        .clauses
        .iter()
        .filter_map(|c| {
            record
                .get(&c.field)
                .map(|v| c.template.replace(&format!("{{{}}}", c.field), v))
        })
        .collect();
    let sep = if pattern.joiner.is_empty() {
        " ".to_string()
    } else {
        format!(" {} ", pattern.joiner)
    };
    format!("{} {}", clauses.join(&sep), pattern.closing)
}

/// Generates `spec.pairs` record/description pairs, deterministic under `spec.seed`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Vec<CorpusPair>, CorpusError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(spec.pairs);
    let optional: Vec<usize> = (0..spec.fields.len()).filter(|&i| !spec.fields[i].required).collect();
    let required: Vec<usize> = (0..spec.fields.len()).filter(|&i| spec.fields[i].required).collect();
    for i in 0..spec.pairs {
        let k = rng.gen_range(spec.min_fields..=spec.max_fields);
        let mut chosen = required.clone();
        let mut pool = optional.clone();
        pool.shuffle(&mut rng);
        chosen.extend(pool.into_iter().take(k - required.len()));
        chosen.sort_unstable();

        let mut entries: Vec<Entry> = Vec::with_capacity(k);
        for &fi in &chosen {
            let f = &spec.fields[fi];
            // Values must be distinct within a record so each appears once in the text.
            let free: Vec<&String> = f
                .values
                .iter()
                .filter(|v| entries.iter().all(|e| &e.value != *v))
                .collect();
            let Some(v) = free.choose(&mut rng) else {
                return Err(CorpusError::InvalidSpec(format!("field {} ran out of distinct values", f.name)));
            };
            entries.push(Entry::new(f.name.clone(), (*v).clone()));
        }
        let record = Record::new(entries)?;
        let pattern = spec.patterns.choose(&mut rng).expect("validated non-empty");
        let text = tokenize(&render(pattern, &record));
        out.push(CorpusPair::new(format!("syn{}-{i:05}", spec.seed), record, text)?);
    }
    Ok(out)
}
