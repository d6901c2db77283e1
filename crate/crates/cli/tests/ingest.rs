use std::fs;

use union_cli::ingest::{load_choice_jsonl, load_comve_b, load_comve_c, load_omcs, ColumnMap, IngestError};
use union_core::corpus::Dataset;

fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, body).unwrap();
    p
}

#[test]
fn comve_c_row_becomes_one_record_with_three_references() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        &dir,
        "c.csv",
        "FalseSent,Reason1,Reason2,Reason3\n\
         We use book to know the time,  A book is used to study. ,A clock is used to know the time.,Books have no clock.\n",
    );
    let recs = load_comve_c(&p, None).unwrap();
    assert_eq!(recs.len(), 1);
    assert_eq!(recs[0].false_statement, "We use book to know the time");
    assert_eq!(recs[0].references[0], "A book is used to study.");
}

#[test]
fn empty_files_yield_no_records() {
    let dir = tempfile::tempdir().unwrap();
    assert!(load_comve_c(&write(&dir, "c.csv", ""), None).unwrap().is_empty());
    assert!(load_comve_b(&write(&dir, "b.csv", ""), None).unwrap().is_empty());
    assert!(load_choice_jsonl(&write(&dir, "o.jsonl", ""), Dataset::Openbook, None).unwrap().is_empty());
    assert!(load_omcs(&write(&dir, "f.txt", "\n\n")).unwrap().is_empty());
}

#[test]
fn gold_letters_and_indices_map_to_positions() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        &dir,
        "o.jsonl",
        "{\"question\":\"q\",\"choices\":[\"a\",\"b\",\"c\",\"d\"],\"answer\":\"C\",\"fact\":\"f\"}\n\
         {\"question\":\"q\",\"choices\":[\"a\",\"b\",\"c\",\"d\"],\"answer\":1}\n\
         {\"question\":\"q\",\"choices\":[\"a\",\"b\",\"c\",\"d\"],\"answer\":\"d\"}\n",
    );
    let recs = load_choice_jsonl(&p, Dataset::Openbook, None).unwrap();
    let gold: Vec<usize> = recs.iter().map(|r| r.gold_index).collect();
    assert_eq!(gold, [2, 1, 3]);
    assert_eq!(recs[0].explanation.as_deref(), Some("f"));
    assert_eq!(recs[1].explanation, None);
    // Letters A..D round-trip through their indices.
    for (i, letter) in ["A", "B", "C", "D"].iter().enumerate() {
        assert_eq!(union_core::corpus::parse_gold_label(letter, 4).unwrap(), i);
    }
}

#[test]
fn malformed_rows_cite_their_line() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(&dir, "b.csv", "FalseSent,OptionA,OptionB,OptionC,GoldLabel\ns,a,b,c,A\ns2,a,b,c,Z\n");
    let err = load_comve_b(&p, None).unwrap_err();
    assert!(matches!(&err, IngestError::Row { line: 3, field, .. } if field == "GoldLabel"), "{err}");
    assert!(err.to_string().contains(":3:"));

    let p = write(&dir, "c.jsonl", "{\"question\":\"q\",\"choices\":[\"a\",\"b\",\"c\"],\"answer\":0}\n");
    let err = load_choice_jsonl(&p, Dataset::Cose, None).unwrap_err();
    assert!(matches!(err, IngestError::Row { line: 1, .. }));
    assert!(err.to_string().contains('5'), "names the expected arity: {err}");

    let p = write(&dir, "bad.jsonl", "\n{not json\n");
    assert!(matches!(load_choice_jsonl(&p, Dataset::Cose, None), Err(IngestError::Row { line: 2, .. })));
}

#[test]
fn column_map_renames_headers() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(&dir, "c.csv", "statement,r1,r2,r3\nfish can fly,a,b,c\n");
    assert!(matches!(load_comve_c(&p, None), Err(IngestError::MissingColumn { .. })));
    let map: ColumnMap = [("FalseSent", "statement"), ("Reason1", "r1"), ("Reason2", "r2"), ("Reason3", "r3")]
        .into_iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
    assert_eq!(load_comve_c(&p, Some(&map)).unwrap()[0].false_statement, "fish can fly");
}

#[test]
fn missing_reference_is_an_arity_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(&dir, "c.csv", "FalseSent,Reason1,Reason2,Reason3\nfish can fly,a,b\n");
    let err = load_comve_c(&p, None).unwrap_err();
    assert!(matches!(err, IngestError::Row { line: 2, .. }), "{err}");
}
