use std::fs;
use std::path::Path;

use fedtrail::data::{fit_plan, ingest_csv, read_raw_records, PreprocessPlan};

const APPLICATION: &str = "\
ID,CODE_GENDER,AMT_INCOME_TOTAL,DAYS_BIRTH,DAYS_EMPLOYED
1,M,100000,-10950,-365
2,F,,-14600,365243
3,F,200000,-7300,-730
4,,150000,-18250,-3650
5,M,300000,-10950,NA
1,F,999,-1,-1
6,F,50000,-10950,-100
";

const CREDIT: &str = "\
ID,MONTHS_BALANCE,STATUS
1,0,C
1,-1,0
2,0,2
3,0,X
3,-1,5
4,0,1
5,0,0
7,0,3
";

fn plan() -> PreprocessPlan {
    PreprocessPlan {
        numeric_columns: vec!["AMT_INCOME_TOTAL".into()],
        categorical_columns: vec!["CODE_GENDER".into()],
        ..PreprocessPlan::default()
    }
}

fn fixture(dir: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let app = dir.join("application_record.csv");
    let credit = dir.join("credit_record.csv");
    fs::write(&app, APPLICATION).unwrap();
    fs::write(&credit, CREDIT).unwrap();
    (app, credit)
}

#[test]
fn merge_labels_and_derived_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let (app, credit) = fixture(tmp.path());
    let (records, numeric, categorical) = read_raw_records(&app, &credit, &plan()).unwrap();
    assert_eq!(
        numeric,
        ["AMT_INCOME_TOTAL", "age_years", "years_employed", "is_unemployed"]
    );
    assert_eq!(categorical, ["CODE_GENDER"]);

    // Duplicate ID 1 keeps the first row; ID 6 has no credit history.
    let ids: Vec<&str> = records.iter().map(|r| r.id.as_str()).collect();
    assert_eq!(ids, ["1", "2", "3", "4", "5"]);
    let labels: Vec<u8> = records.iter().map(|r| r.label).collect();
    assert_eq!(labels, [0, 1, 1, 0, 0]);

    assert_eq!(records[0].numeric, [Some(100000.0), Some(30.0), Some(1.0), Some(0.0)]);
    assert_eq!(records[1].numeric, [None, Some(40.0), Some(0.0), Some(1.0)]);
    assert_eq!(records[3].numeric[2], Some(10.0));
    assert_eq!(records[4].numeric[2..], [None, None]);
    assert_eq!(records[3].categorical, [None]);
    assert_eq!(records[0].categorical, [Some("M".to_string())]);
}

#[test]
fn fitted_statistics_by_hand() {
    let tmp = tempfile::tempdir().unwrap();
    let (app, credit) = fixture(tmp.path());
    let (records, numeric, categorical) = read_raw_records(&app, &credit, &plan()).unwrap();
    let fitted = fit_plan(&records, numeric, categorical).unwrap();

    // Income: median of {100k, 200k, 150k, 300k}; mean/std after imputation.
    assert_eq!(fitted.medians[0], 175000.0);
    assert_eq!(fitted.means[0], 185000.0);
    assert!((fitted.stds[0] - 4400f64.sqrt() * 1000.0).abs() < 1e-6);
    assert_eq!(fitted.medians[2], 1.5);
    assert_eq!(fitted.medians[3], 0.0);

    // F and M tie at two each; the lexicographically smaller wins.
    assert_eq!(fitted.modes, ["F"]);
    assert_eq!(fitted.vocabularies, [vec!["F".to_string(), "M".to_string()]]);
    assert_eq!(fitted.dim(), 6);
    assert_eq!(fitted.feature_names()[4..], ["CODE_GENDER=F", "CODE_GENDER=M"]);

    let row = fitted.transform(&records[1]);
    assert!((row[0] - (175000.0 - 185000.0) / (4400f64.sqrt() * 1000.0)).abs() < 1e-12);
    assert_eq!(row[4..], [1.0, 0.0]);
    let row = fitted.transform(&records[3]);
    assert_eq!(row[4..], [1.0, 0.0]);
}

#[test]
fn unseen_category_encodes_as_zeros() {
    let tmp = tempfile::tempdir().unwrap();
    let (app, credit) = fixture(tmp.path());
    let (mut records, numeric, categorical) = read_raw_records(&app, &credit, &plan()).unwrap();
    let fitted = fit_plan(&records, numeric, categorical).unwrap();
    records[0].categorical = vec![Some("X".into())];
    assert_eq!(fitted.transform(&records[0])[4..], [0.0, 0.0]);
}

#[test]
fn ingest_splits_and_standardizes_training_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let (app, credit) = fixture(tmp.path());
    let ing = ingest_csv(&app, &credit, &plan(), 3).unwrap();
    assert_eq!(ing.train.len(), 4);
    assert_eq!(ing.test.len(), 1);
    let mut all: Vec<String> = ing.train_ids.iter().chain(&ing.test_ids).cloned().collect();
    all.sort();
    assert_eq!(all, ["1", "2", "3", "4", "5"]);

    for j in 0..4 {
        let col: Vec<f64> = (0..ing.train.len()).map(|i| ing.train.row(i)[j]).collect();
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / col.len() as f64;
        assert!(mean.abs() < 1e-12, "column {j} mean {mean}");
        assert!(var == 0.0 || (var - 1.0).abs() < 1e-12, "column {j} var {var}");
    }
    let again = ingest_csv(&app, &credit, &plan(), 3).unwrap();
    assert_eq!(again.train_ids, ing.train_ids);
    assert_eq!(again.train.features(), ing.train.features());
}

#[test]
fn ingest_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let (app, credit) = fixture(tmp.path());
    assert!(ingest_csv(&tmp.path().join("missing.csv"), &credit, &plan(), 0).is_err());

    let bad_plan = PreprocessPlan {
        numeric_columns: vec!["NOT_A_COLUMN".into()],
        ..plan()
    };
    assert!(ingest_csv(&app, &credit, &bad_plan, 0).is_err());

    let garbage = tmp.path().join("garbage.csv");
    fs::write(
        &garbage,
        "ID,CODE_GENDER,AMT_INCOME_TOTAL,DAYS_BIRTH,DAYS_EMPLOYED\n1,M,lots,-1,-1\n",
    )
    .unwrap();
    assert!(ingest_csv(&garbage, &credit, &plan(), 0).is_err());
}
