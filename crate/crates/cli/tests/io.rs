use herit::io::*;
use herit::CliError;

fn parse(text: &str) -> herit::Result<herit_core::GenotypeMatrix> {
    parse_genotypes(text.as_bytes(), "test.csv")
}

fn location(e: CliError) -> (usize, usize) {
    match e {
        CliError::Parse { line, column, .. } => (line, column),
        other => panic!("expected a parse error, got {other}"),
    }
}

#[test]
fn missing_tokens_count_towards_missingness() {
    let g = parse("sample_id,v1,v2\ns1,0,NA\ns2,1,1\ns3,NA,0\n").unwrap();
    assert_eq!((g.n(), g.p()), (3, 2));
    for &f in g.missing_frac() {
        assert!((f - 1.0 / 3.0).abs() < 1e-15);
    }
    assert!(g.matrix().get(0, 1).is_nan());
    assert_eq!(g.variant_ids(), ["v1", "v2"]);
    assert_eq!(g.sample_ids(), ["s1", "s2", "s3"]);
}

#[test]
fn ragged_row_is_located() {
    let err = parse("sample_id,v1,v2\ns1,0,1\ns2,1\n").unwrap_err();
    assert_eq!(location(err).0, 3);
}

#[test]
fn duplicate_ids_are_located() {
    assert_eq!(location(parse("sample_id,v1,v1\ns1,0,1\n").unwrap_err()), (1, 3));
    assert_eq!(location(parse("sample_id,v1\ns1,0\ns1,1\n").unwrap_err()), (3, 1));
}

#[test]
fn invalid_token_is_located() {
    assert_eq!(location(parse("sample_id,v1,v2\ns1,0,x\n").unwrap_err()), (2, 3));
}

#[test]
fn empty_inputs_are_rejected() {
    assert!(parse("").is_err());
    assert!(parse("sample_id,v1\n").is_err());
    assert!(parse_phenotypes("".as_bytes(), "y.csv").is_err());
}

#[test]
fn genotype_round_trip_is_exact() {
    let text = "sample_id,v1,v2,v3\ns1,0,1,NA\ns2,1,0.5,1\n";
    let g = parse(text).unwrap();
    let mut out = Vec::new();
    write_genotypes(&mut out, &g).unwrap();
    let back = parse(std::str::from_utf8(&out).unwrap()).unwrap();
    assert_eq!(back.variant_ids(), g.variant_ids());
    assert_eq!(back.sample_ids(), g.sample_ids());
    for i in 0..g.n() {
        for j in 0..g.p() {
            let (a, b) = (g.matrix().get(i, j), back.matrix().get(i, j));
            assert!(a == b || (a.is_nan() && b.is_nan()));
        }
    }
}

#[test]
fn phenotype_round_trip_preserves_bits() {
    let ids: Vec<String> = (0..4).map(|i| format!("s{i}")).collect();
    let y = [0.1, -2.5e-7, 1.0 / 3.0, 12345.678];
    let mut out = Vec::new();
    write_phenotypes(&mut out, &ids, &y).unwrap();
    let t = parse_phenotypes(out.as_slice(), "y.csv").unwrap();
    assert_eq!(t.sample_ids, ids);
    assert_eq!(t.values, y);
}

#[test]
fn alignment_follows_genotype_order() {
    let g = parse("sample_id,v1\na,0\nb,1\nc,0\n").unwrap();
    let t = parse_phenotypes("sample_id,y\nc,3\na,1\nb,2\n".as_bytes(), "y.csv").unwrap();
    let y = align_phenotype(&g, &t).unwrap();
    assert_eq!(y.values(), [1.0, 2.0, 3.0]);
}

#[test]
fn alignment_mismatches_are_errors() {
    let g = parse("sample_id,v1\na,0\nb,1\n").unwrap();
    let missing = parse_phenotypes("sample_id,y\na,1\n".as_bytes(), "y.csv").unwrap();
    assert!(matches!(align_phenotype(&g, &missing), Err(CliError::Alignment(_))));
    let extra = parse_phenotypes("sample_id,y\na,1\nb,2\nz,3\n".as_bytes(), "y.csv").unwrap();
    assert!(matches!(align_phenotype(&g, &extra), Err(CliError::Alignment(_))));
}

#[test]
fn truth_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("truth.toml");
    let truth = Truth {
        true_h2: 0.7999999999999,
        target_h2: 0.8,
        sigma2_eps: 1.0,
        seed: 7,
        model: "fixed_effect".into(),
        causal_variants: vec!["v3".into(), "v9".into()],
        causal_effects: vec![0.25, -1.5],
    };
    write_truth(&path, &truth).unwrap();
    assert_eq!(read_truth(&path).unwrap(), truth);
}
