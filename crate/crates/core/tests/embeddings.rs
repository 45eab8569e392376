use std::fs;
use std::sync::Arc;

use xferlab::corpus::{Example, Polarity, Provenance};
use xferlab::featurize::{
    load_embedding_file, sidecar_path, write_embedding_file, EmbeddingTable, Encoder, Features,
};
use xferlab::Error;

/// WSEB bytes assembled by hand, independent of the writer.
fn raw_wseb(magic: &[u8; 4], version: u32, dim: u32, rows: &[(u64, Vec<f32>)]) -> Vec<u8> {
    let mut b = Vec::new();
    b.extend_from_slice(magic);
    b.extend_from_slice(&version.to_le_bytes());
    b.extend_from_slice(&dim.to_le_bytes());
    b.extend_from_slice(&(rows.len() as u64).to_le_bytes());
    for (id, row) in rows {
        b.extend_from_slice(&id.to_le_bytes());
        for v in row {
            b.extend_from_slice(&v.to_le_bytes());
        }
    }
    b
}

fn row(dim: usize, seed: u64) -> Vec<f32> {
    (0..dim)
        .map(|i| ((i as u64 * 2654435761 + seed * 40503) % 10007) as f32 / 997.0 - 5.0)
        .collect()
}

fn example(id: u64) -> Example {
    Example {
        review_id: id,
        text: String::new(),
        label: Polarity::Positive,
        provenance: Provenance::Full,
        domain: "D".into(),
    }
}

#[test]
fn dim_768_two_rows_round_trip_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("e.wseb");
    let mut table = EmbeddingTable::new(768, "enc/mean_tokens").unwrap();
    table.insert(41, row(768, 1)).unwrap();
    let mut tricky = row(768, 2);
    tricky[0] = f32::MIN_POSITIVE / 4.0;
    tricky[1] = -0.0;
    tricky[2] = f32::MAX;
    table.insert(7, tricky).unwrap();
    write_embedding_file(&table, &path, Some("abc".into())).unwrap();

    let bytes = fs::read(&path).unwrap();
    assert_eq!(bytes.len(), 20 + 2 * (8 + 4 * 768));
    assert_eq!(
        bytes,
        raw_wseb(
            b"WSEB",
            1,
            768,
            &table
                .rows()
                .map(|(i, r)| (i, r.to_vec()))
                .collect::<Vec<_>>()
        )
    );

    let back = load_embedding_file(&path).unwrap();
    assert_eq!((back.dim(), back.len()), (768, 2));
    assert_eq!(back.source_tag(), "enc/mean_tokens");
    for (id, r) in table.rows() {
        let got = back.get(id).unwrap();
        assert!(got.iter().zip(r).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
    assert_eq!(back.rows().map(|(i, _)| i).collect::<Vec<_>>(), [41, 7]);
    let sidecar: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(sidecar_path(&path)).unwrap()).unwrap();
    assert_eq!(sidecar["corpus_checksum"], "abc");
    assert_eq!(sidecar["count"], 2);
}

#[test]
fn nan_in_row_five_cites_its_id() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("e.wseb");
    let mut rows: Vec<(u64, Vec<f32>)> = (0..8).map(|i| (100 + i, row(4, i))).collect();
    rows[4].1[2] = f32::NAN;
    fs::write(&path, raw_wseb(b"WSEB", 1, 4, &rows)).unwrap();
    let err = load_embedding_file(&path).unwrap_err();
    assert!(matches!(err, Error::Data(_)), "{err:?}");
    assert!(err.to_string().contains("104"), "{err}");
}

#[test]
fn malformed_files_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let rows: Vec<(u64, Vec<f32>)> = (0..3).map(|i| (i, row(5, i))).collect();
    let good = raw_wseb(b"WSEB", 1, 5, &rows);
    let check = |name: &str, bytes: &[u8], want: fn(&Error) -> bool| {
        let p = dir.path().join(name);
        fs::write(&p, bytes).unwrap();
        let err = load_embedding_file(&p).unwrap_err();
        assert!(want(&err), "{name}: {err:?}");
    };
    check("magic", &raw_wseb(b"WSEX", 1, 5, &rows), |e| {
        matches!(e, Error::Format(_))
    });
    check("version", &raw_wseb(b"WSEB", 2, 5, &rows), |e| {
        matches!(e, Error::Format(_))
    });
    check("header", &good[..11], |e| matches!(e, Error::Truncated(_)));
    check("body", &good[..good.len() - 3], |e| {
        matches!(e, Error::Truncated(_))
    });
    let mut extra = good.clone();
    extra.push(0);
    check("trailing", &extra, |e| matches!(e, Error::Format(_)));
    check("dim0", &raw_wseb(b"WSEB", 1, 0, &[]), |_| true);
    let dup = vec![(1, row(5, 1)), (1, row(5, 2))];
    check("dup", &raw_wseb(b"WSEB", 1, 5, &dup), |e| {
        e.to_string().contains('1')
    });

    let ok = dir.path().join("ok.wseb");
    fs::write(&ok, &good).unwrap();
    assert_eq!(load_embedding_file(&ok).unwrap().source_tag(), "ok");
    fs::write(
        sidecar_path(&ok),
        r#"{"source_tag": "s", "dim": 6, "count": 3, "corpus_checksum": null}"#,
    )
    .unwrap();
    assert!(matches!(load_embedding_file(&ok), Err(Error::Format(_))));
}

#[test]
fn frozen_encoder_lookup() {
    let mut table = EmbeddingTable::new(3, "t").unwrap();
    table.insert(5, vec![1.5, -2.0, 0.25]).unwrap();
    let enc = Encoder::frozen(Arc::new(table), None);
    match enc.encode(&example(5)).unwrap() {
        Features::Dense(v) => assert_eq!(v, [1.5, -2.0, 0.25]),
        other => panic!("expected dense features, got {other:?}"),
    }
    assert!(matches!(
        enc.encode(&example(6)),
        Err(Error::MissingEmbedding(6))
    ));
}

#[test]
fn frozen_encoder_from_spec_checks_dim() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("e.wseb");
    let mut table = EmbeddingTable::new(3, "t").unwrap();
    table.insert(1, vec![0.0; 3]).unwrap();
    write_embedding_file(&table, &path, None).unwrap();
    let spec = |dim| xferlab::featurize::EncoderSpec::FrozenEmbedding {
        dim,
        source_tag: "t".into(),
        path: Some(path.clone()),
    };
    assert_eq!(Encoder::from_spec(&spec(3)).unwrap().input_dim(), 3);
    let msg = Encoder::from_spec(&spec(4)).unwrap_err().to_string();
    assert!(msg.contains('4') && msg.contains('3'), "{msg}");
}
