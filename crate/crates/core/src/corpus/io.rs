use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{detokenize, tokenize, CorpusError, CorpusPair, Entry, Record, ValueNormalizer};

/// On-disk line layout. Field order here is the canonical key order.
#[derive(Serialize, Deserialize)]
struct PairLine {
    id: String,
    record: Vec<Entry>,
    text: String,
}

/// Parses one corpus line; values go through `normalizer`.
pub fn parse_pair_line(line: &str, normalizer: &ValueNormalizer) -> Result<CorpusPair, CorpusError> {
    let raw: PairLine = serde_json::from_str(line).map_err(|e| CorpusError::Parse(e.to_string()))?;
    let entries = raw
        .record
        .into_iter()
        .map(|e| {
            let value = normalizer.normalize(&e.field, &e.value)?;
            Ok(Entry::new(e.field, value))
        })
        .collect::<Result<Vec<_>, CorpusError>>()?;
    let record = Record::new(entries)?;
    CorpusPair::new(raw.id, record, tokenize(&raw.text))
}

pub fn pair_to_line(pair: &CorpusPair) -> String {
    let line = PairLine {
        id: pair.id.clone(),
        record: pair.record.entries().to_vec(),
        text: detokenize(&pair.text),
    };
    serde_json::to_string(&line).expect("corpus line serializes")
}

/// Reads a line-delimited corpus file. Blank lines are skipped; any other
/// malformed line fails with its 1-based line number.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<CorpusPair>, CorpusError> {
    read_corpus(BufReader::new(fs::File::open(path)?))
}

pub fn read_corpus(reader: impl BufRead) -> Result<Vec<CorpusPair>, CorpusError> {
    let normalizer = ValueNormalizer::default();
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let pair = parse_pair_line(&line, &normalizer).map_err(|e| CorpusError::AtLine {
            line: i + 1,
            source: Box::new(e),
        })?;
        out.push(pair);
    }
    Ok(out)
}

pub fn write_corpus(mut writer: impl Write, corpus: &[CorpusPair]) -> Result<(), CorpusError> {
    for pair in corpus {
        writeln!(writer, "{}", pair_to_line(pair))?;
    }
    Ok(())
}

pub fn save_corpus(path: impl AsRef<Path>, corpus: &[CorpusPair]) -> Result<(), CorpusError> {
    let mut buf = Vec::new();
    write_corpus(&mut buf, corpus)?;
    fs::write(path, buf)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const LINE: &str = r#"{"id":"r1","record":[{"field":"Name","value":"Cocum"},{"field":"familyFriendly","value":"no"}],"text":"Cocum is not family friendly."}"#;

    #[test]
    fn loads_and_normalizes() {
        let pairs = read_corpus(LINE.as_bytes()).unwrap();
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].record.get("Name"), Some("cocum"));
        assert_eq!(pairs[0].record.get("familyFriendly"), Some("not_family_friendly"));
        assert_eq!(pairs[0].text.last().map(String::as_str), Some("."));
    }

    #[test]
    fn duplicate_field_names_the_line() {
        let bad = r#"{"id":"r2","record":[{"field":"Food","value":"a"},{"field":"Food","value":"b"}],"text":"x"}"#;
        let input = format!("{LINE}\n{bad}\n");
        match read_corpus(input.as_bytes()) {
            Err(CorpusError::AtLine { line, source }) => {
                assert_eq!(line, 2);
                assert!(matches!(*source, CorpusError::DuplicateField(_)));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_json_names_the_line() {
        let input = format!("{LINE}\n\n{{not json\n");
        assert!(matches!(
            read_corpus(input.as_bytes()),
            Err(CorpusError::AtLine { line: 3, .. })
        ));
    }

    #[test]
    fn canonical_file_roundtrips_bytes() {
        let pairs = read_corpus(LINE.as_bytes()).unwrap();
        let mut canon = Vec::new();
        write_corpus(&mut canon, &pairs).unwrap();
        let again = read_corpus(canon.as_slice()).unwrap();
        let mut canon2 = Vec::new();
        write_corpus(&mut canon2, &again).unwrap();
        assert_eq!(canon, canon2);
        assert_eq!(
            String::from_utf8(canon).unwrap().trim_end(),
            r#"{"id":"r1","record":[{"field":"Name","value":"cocum"},{"field":"familyFriendly","value":"not_family_friendly"}],"text":"cocum is not family friendly ."}"#
        );
    }
}
