use std::fs;
use std::path::Path;

use xferlab::corpus::{
    build_fld, build_wld, load_corpus, load_manifest, save_manifest, split, write_corpus_jsonl,
    CorpusFormat, GoldLabel, Split,
};
use xferlab::Error;

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn three_row_jsonl_in_file_order() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "c.jsonl",
        r#"{"id": 9, "text": "Great!!!", "rating": 5}
{"id": 2, "text": "meh", "rating": 3, "domain": "X"}

{"id": 4, "text": "Cookies & Cream", "label": "negative"}
"#,
    );
    let rows = load_corpus(&p, CorpusFormat::Jsonl).unwrap();
    assert_eq!(rows.iter().map(|r| r.id).collect::<Vec<_>>(), [9, 2, 4]);
    assert_eq!(rows[0].rating, Some(5));
    assert_eq!(rows[1].domain, "X");
    assert_eq!(rows[2].gold_polarity, Some(GoldLabel::Negative));
    assert_eq!(rows[2].rating, None);
}

#[test]
fn rating_out_of_range_names_row() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "c.jsonl",
        "{\"id\": 1, \"text\": \"a\", \"rating\": 5}\n{\"id\": 77, \"text\": \"b\", \"rating\": 6}\n",
    );
    let err = load_corpus(&p, CorpusFormat::Jsonl).unwrap_err();
    assert!(matches!(err, Error::Parse { line: 2, .. }), "{err:?}");
    let msg = err.to_string();
    assert!(msg.contains(":2:") && msg.contains("77"), "{msg}");

    let p = write(
        dir.path(),
        "c.csv",
        "id,text,rating,label,domain\n1,a,5,,\n12,b,6,,\n",
    );
    let err = load_corpus(&p, CorpusFormat::Csv).unwrap_err();
    assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
    assert!(err.to_string().contains("12"));
}

#[test]
fn duplicate_ids_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "c.jsonl",
        "{\"id\": 1, \"text\": \"a\", \"rating\": 5}\n{\"id\": 1, \"text\": \"b\", \"rating\": 1}\n",
    );
    let msg = load_corpus(&p, CorpusFormat::Jsonl)
        .unwrap_err()
        .to_string();
    assert!(msg.contains("duplicate id 1"), "{msg}");
}

#[test]
fn malformed_rows_rejected() {
    let dir = tempfile::tempdir().unwrap();
    for (name, text, format) in [
        (
            "a.jsonl",
            "{\"id\": 1, \"text\": \"a\"}\n",
            CorpusFormat::Jsonl,
        ),
        (
            "b.jsonl",
            "{\"id\": 1, \"text\": \"a\", \"label\": \"great\"}\n",
            CorpusFormat::Jsonl,
        ),
        ("c.jsonl", "not json\n", CorpusFormat::Jsonl),
        ("d.csv", "id,text,stars\n1,a,5\n", CorpusFormat::Csv),
        (
            "e.csv",
            "id,text,rating,label,domain\n1,a,five,,\n",
            CorpusFormat::Csv,
        ),
    ] {
        let p = write(dir.path(), name, text);
        assert!(load_corpus(&p, format).is_err(), "{name}");
    }
}

#[test]
fn csv_quoting_and_optional_fields() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "c.csv",
        "id,text,rating,label,domain\n1,\"Loved it, really\",4,,A\n2,\"said \"\"meh\"\"\nthen left\",,neutral,A\n3,plain,1,negative,\n",
    );
    let rows = load_corpus(&p, CorpusFormat::Csv).unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0].text, "Loved it, really");
    assert_eq!(rows[1].text, "said \"meh\"\nthen left");
    assert_eq!(rows[1].rating, None);
    assert_eq!(rows[2].gold_polarity, Some(GoldLabel::Negative));
    assert_eq!(rows[2].domain, "");
}

#[test]
fn corpus_jsonl_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "c.csv",
        "id,text,rating,label,domain\n5,\"x, y\",2,positive,D\n6,z,,neutral,\n",
    );
    let rows = load_corpus(&p, CorpusFormat::Csv).unwrap();
    let out = dir.path().join("out.jsonl");
    write_corpus_jsonl(&rows, &out).unwrap();
    assert_eq!(load_corpus(&out, CorpusFormat::Jsonl).unwrap(), rows);
}

#[test]
fn manifest_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "c.jsonl",
        &(0..40)
            .map(|i| {
                format!(
                    "{{\"id\": {i}, \"text\": \"review {i}\", \"rating\": {}, \"label\": \"{}\"}}\n",
                    1 + i % 5,
                    ["positive", "negative", "neutral"][i % 3]
                )
            })
            .collect::<String>(),
    );
    let rows = load_corpus(&p, CorpusFormat::Jsonl).unwrap();

    let wld = build_wld(&rows, "D").unwrap();
    assert_eq!(wld.len(), 32);
    let wpath = dir.path().join("DWLD.all.jsonl");
    let header = save_manifest(&wld, &wpath, None, None).unwrap();
    let (back, back_header) = load_manifest(&wpath).unwrap();
    assert_eq!(back, wld);
    assert_eq!(back_header, header);
    assert!(dir.path().join("DWLD.all.header.json").exists());

    let fld = build_fld(&rows, "D").unwrap();
    let fraction = "17/20".parse().unwrap();
    let (train, test) = split(&fld, fraction, 3).unwrap();
    for part in [&train, &test] {
        let path = dir
            .path()
            .join(format!("DFLD.{}.jsonl", part.split().as_str()));
        let header = save_manifest(part, &path, Some(3), Some(fraction)).unwrap();
        assert_eq!(header.seed, Some(3));
        let (back, h) = load_manifest(&path).unwrap();
        assert_eq!(&back, part);
        assert_eq!(h.train_fraction, Some(fraction));
    }
    assert_eq!(train.split(), Split::Train);
}

#[test]
fn manifest_header_mismatch_detected() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "c.jsonl",
        "{\"id\": 1, \"text\": \"a\", \"rating\": 5}\n{\"id\": 2, \"text\": \"b\", \"rating\": 1}\n",
    );
    let wld = build_wld(&load_corpus(&p, CorpusFormat::Jsonl).unwrap(), "D").unwrap();
    let m = dir.path().join("w.all.jsonl");
    save_manifest(&wld, &m, None, None).unwrap();
    let text = fs::read_to_string(&m).unwrap();
    fs::write(&m, text.lines().next().unwrap().to_string() + "\n").unwrap();
    assert!(load_manifest(&m).is_err());
}
