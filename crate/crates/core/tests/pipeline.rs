use std::fs;
use std::path::Path;

use xdice::io::grid::format_grid;
use xdice::io::raster::{encode_pgm, mask_pixels};
use xdice::io::{load_grid, load_mask, DatasetManifest};
use xdice::pipeline::{
    pairwise_to_csv, run_curves, run_eval, run_grad_check, run_loss, run_pairwise, run_regions,
    run_roc, write_curves, write_gradient, MaskSource, Options,
};
use xdice::synth::{write_dataset, SynthConfig};
use xdice::{aggregate, dice, extended_dice, AcceptableRegion, AnnotationSet, IntensityStat, Mask};

// Small helpers for hand-built datasets.
struct Dataset {
    dir: tempfile::TempDir,
    rows: Vec<String>,
    header: String,
}

impl Dataset {
    fn new(annotators: &[&str]) -> Self {
        let mut header =
            String::from("image_id,subject_id,frame_index,image_path,prediction_path,grade");
        for a in annotators {
            header.push_str(&format!(",mask:{a}"));
        }
        Dataset {
            dir: tempfile::tempdir().unwrap(),
            rows: Vec::new(),
            header,
        }
    }

    fn path(&self) -> &Path {
        self.dir.path()
    }

    fn raster(&self, name: &str, w: usize, h: usize, pixels: &[u8]) -> String {
        fs::write(self.path().join(name), encode_pgm(w, h, pixels)).unwrap();
        name.to_string()
    }

    fn mask(&self, name: &str, m: &Mask) -> String {
        self.raster(name, m.width(), m.height(), &mask_pixels(m))
    }

    #[allow(clippy::too_many_arguments)]
    fn entry(
        &mut self,
        id: &str,
        subject: &str,
        frame: i64,
        pixels: &[u8],
        prediction: Option<&Mask>,
        grade: Option<u8>,
        masks: &[&Mask],
    ) {
        let (w, h) = masks[0].dims();
        let frame_file = self.raster(&format!("{id}_frame.pgm"), w, h, pixels);
        let pred = prediction
            .map(|p| self.mask(&format!("{id}_pred.pgm"), p))
            .unwrap_or_default();
        let mut row = format!(
            "{id},{subject},{frame},{frame_file},{pred},{}",
            grade.map(|g| g.to_string()).unwrap_or_default()
        );
        for (k, m) in masks.iter().enumerate() {
            row.push(',');
            row.push_str(&self.mask(&format!("{id}_m{k}.pgm"), m));
        }
        self.rows.push(row);
    }

    fn manifest(&self) -> DatasetManifest {
        let path = self.path().join("manifest.csv");
        fs::write(
            &path,
            format!("{}\n{}\n", self.header, self.rows.join("\n")),
        )
        .unwrap();
        DatasetManifest::load(&path).unwrap()
    }
}

fn m(w: usize, h: usize, px: &[(usize, usize)]) -> Mask {
    Mask::from_coords(w, h, px.iter().copied()).unwrap()
}

fn serial() -> Options {
    Options {
        jobs: 1,
        ..Options::default()
    }
}

#[test]
fn eval_prediction_equal_to_identical_annotators() {
    let mut ds = Dataset::new(&["c1", "c2"]);
    let a = m(4, 4, &[(1, 1), (1, 2), (2, 1)]);
    ds.entry("i1", "s", 1, &[10; 16], Some(&a), None, &[&a, &a]);
    let report = run_eval(&ds.manifest(), &serial()).unwrap();
    assert_eq!(report.rows.len(), 1);
    for (col, v) in report.columns.iter().zip(&report.rows[0].values) {
        let expected = if col.starts_with("hausdorff") {
            0.0
        } else {
            1.0
        };
        assert_eq!(*v, Some(expected), "{col}");
    }
}

#[test]
fn eval_prediction_between_boundaries() {
    let mut ds = Dataset::new(&["c1", "c2"]);
    let a = m(5, 1, &[(0, 0), (0, 1)]);
    let b = m(5, 1, &[(0, 0), (0, 1), (0, 2), (0, 3)]);
    let p = m(5, 1, &[(0, 0), (0, 1), (0, 2)]);
    ds.entry("i1", "s", 1, &[0; 5], Some(&p), None, &[&a, &b]);
    let report = run_eval(&ds.manifest(), &serial()).unwrap();
    let get = |c: &str| report.rows[0].values[report.column(c).unwrap()].unwrap();
    assert_eq!(get("extended_dice"), 1.0);
    assert_eq!(get("dice_c1"), dice(&p, &a).unwrap());
    assert!(get("dice_c1") < 1.0 && get("dice_c2") < 1.0);
    assert_eq!(get("dice_c2"), 6.0 / 7.0);
}

#[test]
fn eval_aggregates_match_rows() {
    let mut ds = Dataset::new(&["c1", "c2"]);
    let a = m(3, 3, &[(0, 0), (1, 1)]);
    let b = m(3, 3, &[(1, 1), (2, 2)]);
    let preds = [
        m(3, 3, &[(1, 1)]),
        m(3, 3, &[(0, 0), (2, 2)]),
        m(3, 3, &[(0, 2)]),
    ];
    for (k, p) in preds.iter().enumerate() {
        ds.entry(
            &format!("i{k}"),
            "s",
            k as i64,
            &[0; 9],
            Some(p),
            None,
            &[&a, &b],
        );
    }
    let report = run_eval(&ds.manifest(), &serial()).unwrap();
    let k = report.column("extended_dice").unwrap();
    let region =
        xdice::acceptable_region(&AnnotationSet::from_masks(vec![a.clone(), b.clone()]).unwrap());
    let by_hand: Vec<f64> = preds
        .iter()
        .map(|p| extended_dice(p, &region).unwrap())
        .collect();
    let rows: Vec<f64> = report.rows.iter().map(|r| r.values[k].unwrap()).collect();
    assert_eq!(rows, by_hand);
    assert_eq!(
        report.aggregates["extended_dice"],
        Some(aggregate(&by_hand).unwrap())
    );
}

#[test]
fn eval_records_row_errors_and_continues() {
    let mut ds = Dataset::new(&["c1"]);
    let a = m(2, 2, &[(0, 0)]);
    ds.entry("ok", "s", 1, &[0; 4], Some(&a), None, &[&a]);
    ds.entry(
        "bad",
        "s",
        2,
        &[0; 4],
        Some(&m(3, 1, &[(0, 0)])),
        None,
        &[&a],
    );
    ds.entry("nopred", "s", 3, &[0; 4], None, None, &[&a]);
    let report = run_eval(&ds.manifest(), &serial()).unwrap();
    let failed: Vec<&str> = report.failed_rows().map(|r| r.image_id.as_str()).collect();
    assert_eq!(failed, vec!["bad", "nopred"]);
    assert_eq!(report.aggregates["extended_dice"].unwrap().count, 1);
}

#[test]
fn soft_grid_predictions_are_binarized() {
    let mut ds = Dataset::new(&["c1"]);
    let a = m(2, 1, &[(0, 0)]);
    ds.entry("i", "s", 1, &[0; 2], None, None, &[&a]);
    fs::write(ds.path().join("p.grid"), format_grid(2, 1, &[0.9, 0.5])).unwrap();
    ds.rows[0] = ds.rows[0].replacen(",,", ",p.grid,", 1);
    let report = run_eval(&ds.manifest(), &serial()).unwrap();
    assert_eq!(report.rows[0].values[0], Some(1.0));

    let strict = Options {
        binarize_threshold: 0.95,
        ..serial()
    };
    let report = run_eval(&ds.manifest(), &strict).unwrap();
    assert_eq!(report.rows[0].values[0], Some(0.0));
}

#[test]
fn pairwise_over_images() {
    let mut ds = Dataset::new(&["c1", "c2"]);
    let a = m(2, 2, &[(0, 0), (0, 1), (1, 0)]);
    let b = m(2, 2, &[(0, 1), (1, 0), (1, 1)]);
    ds.entry("i1", "s", 1, &[0; 4], None, None, &[&a, &b]);
    ds.entry("i2", "s", 2, &[0; 4], None, None, &[&a, &a]);
    let matrix = run_pairwise(&ds.manifest(), &serial()).unwrap();
    let off = (4.0 / 6.0 + 1.0) / 2.0;
    assert_eq!(matrix.values[0][1], Some(off));
    assert_eq!(matrix.values[1][0], Some(off));
    assert_eq!(matrix.values[0][0], Some(1.0));
    assert_eq!(
        pairwise_to_csv(&matrix),
        format!("annotator,c1,c2\nc1,1.0,{off:?}\nc2,{off:?},1.0\n")
    );

    let mut single = Dataset::new(&["c1", "c2"]);
    single.entry("i1", "s", 1, &[0; 4], None, None, &[&a, &b]);
    let matrix = run_pairwise(&single.manifest(), &serial()).unwrap();
    assert_eq!(matrix.values[0][1], Some(4.0 / 6.0));
}

#[test]
fn pairwise_rejects_inconsistent_annotators() {
    let mut ds = Dataset::new(&["c1", "c2", "c3"]);
    let a = m(2, 2, &[(0, 0)]);
    ds.entry("i1", "s", 1, &[0; 4], None, None, &[&a, &a, &a]);
    ds.entry("i2", "s", 2, &[0; 4], None, None, &[&a, &a]);
    ds.rows[1].push(',');
    assert!(run_pairwise(&ds.manifest(), &serial()).is_err());

    let mut ds = Dataset::new(&["c1"]);
    ds.entry("i1", "s", 1, &[0; 4], None, None, &[&a]);
    assert!(run_pairwise(&ds.manifest(), &serial()).is_err());
}

#[test]
fn regions_round_trip_and_majority() {
    let mut ds = Dataset::new(&["c1", "c2", "c3", "c4", "c5"]);
    let ms: Vec<Mask> = (0..5)
        .map(|k| Mask::from_coords(5, 1, (0..=k).map(|c| (0, c))).unwrap())
        .collect();
    let refs: Vec<&Mask> = ms.iter().collect();
    ds.entry("e1", "s", 1, &[0; 5], None, None, &refs);
    let a = m(5, 1, &[(0, 0)]);
    let b = m(5, 1, &[(0, 4)]);
    ds.entry("e2", "s", 2, &[0; 5], None, None, &[&a, &b, &a, &b, &b]);
    let manifest = ds.manifest();

    let out = ds.path().join("regions");
    let files = run_regions(&manifest, &out, "pgm", &serial()).unwrap();
    let f1 = files[0].as_ref().unwrap();
    let inner = load_mask(&f1.inner).unwrap();
    assert_eq!(inner, m(5, 1, &[(0, 0)]));
    assert_eq!(load_mask(&f1.outer).unwrap(), Mask::full(5, 1));
    // pixel c is marked by 5 - c annotators
    assert_eq!(
        load_mask(&f1.majority).unwrap(),
        m(5, 1, &[(0, 0), (0, 1), (0, 2)])
    );
    let f2 = files[1].as_ref().unwrap();
    assert_eq!(fs::read(&f2.inner).unwrap(), encode_pgm(5, 1, &[0; 5]));
    assert_eq!(load_mask(&f2.majority).unwrap(), b);

    let blocker = ds.path().join("file");
    fs::write(&blocker, b"").unwrap();
    assert!(run_regions(&manifest, &blocker.join("sub"), "pgm", &serial()).is_err());
}

#[test]
fn curves_ramp_and_sources() {
    let mut ds = Dataset::new(&["c1", "c2"]);
    let a = m(3, 1, &[(0, 0), (0, 1)]);
    let b = m(3, 1, &[(0, 1), (0, 2)]);
    // frames listed out of order on purpose
    for (frame, level) in [(12, 30u8), (10, 10), (11, 20)] {
        ds.entry(
            &format!("f{frame}"),
            "s1",
            frame,
            &[level; 3],
            Some(&a),
            None,
            &[&a, &b],
        );
    }
    let manifest = ds.manifest();
    let sources = [
        MaskSource::Annotator("c1".into()),
        MaskSource::Prediction,
        MaskSource::Consensus,
    ];
    let subjects = run_curves(&manifest, &sources, IntensityStat::Mean, &serial()).unwrap();
    assert_eq!(subjects.len(), 1);
    let s = &subjects[0];
    assert_eq!(s.reference.frame_indices(), &[10, 11, 12]);
    assert_eq!(s.reference.values(), &[Some(10.0), Some(20.0), Some(30.0)]);
    for c in &s.sources {
        assert_eq!(c.error, Some(0.0), "{}", c.source);
    }

    write_curves(ds.path(), &subjects).unwrap();
    let text = fs::read_to_string(ds.path().join("curves/s1/prediction.txt")).unwrap();
    assert_eq!(text, "10 10\n11 20\n12 30\n");
    let summary = fs::read_to_string(ds.path().join("curves.csv")).unwrap();
    assert!(summary.contains("s1,consensus,0.0,3,0"));

    assert!(run_curves(
        &manifest,
        &[MaskSource::Annotator("nobody".into())],
        IntensityStat::Mean,
        &serial()
    )
    .is_err());
}

#[test]
fn curves_flag_missing_frames() {
    let mut ds = Dataset::new(&["c1"]);
    let a = m(2, 1, &[(0, 0)]);
    let empty = Mask::empty(2, 1);
    ds.entry("a", "s", 1, &[5; 2], Some(&a), None, &[&a]);
    ds.entry("b", "s", 2, &[6; 2], Some(&empty), None, &[&a]);
    ds.entry("c", "s", 3, &[7; 2], Some(&a), None, &[&a]);
    let subjects = run_curves(
        &ds.manifest(),
        &[MaskSource::Prediction],
        IntensityStat::Mean,
        &serial(),
    )
    .unwrap();
    let c = &subjects[0].sources[0];
    assert_eq!(c.curve.values(), &[Some(5.0), None, Some(7.0)]);
    assert_eq!(c.error, Some(0.0));
}

#[test]
fn roc_over_graded_cohort() {
    let mut ds = Dataset::new(&["c1"]);
    let g = m(4, 1, &[(0, 0), (0, 1)]);
    let preds = [
        (m(4, 1, &[(0, 0), (0, 1)]), 4),
        (m(4, 1, &[(0, 0)]), 4),
        (m(4, 1, &[(0, 0), (0, 2)]), 2),
        (m(4, 1, &[(0, 3)]), 1),
    ];
    for (k, (p, grade)) in preds.iter().enumerate() {
        ds.entry(
            &format!("i{k}"),
            "s",
            k as i64,
            &[0; 4],
            Some(p),
            Some(*grade),
            &[&g],
        );
    }
    let manifest = ds.manifest();
    let curves = run_roc(
        &manifest,
        &["extended_dice".into(), "dice_c1".into()],
        &serial(),
    )
    .unwrap();
    assert_eq!(curves[0].1.auc, 1.0);
    assert_eq!(curves[1].1.auc, 1.0);
    assert!(run_roc(&manifest, &["nonsense".into()], &serial()).is_err());

    let report = run_eval(&manifest, &serial()).unwrap();
    assert_eq!(report.auc.get("extended_dice"), Some(&1.0));
}

#[test]
fn roc_errors() {
    let mut ds = Dataset::new(&["c1"]);
    let g = m(2, 1, &[(0, 0)]);
    ds.entry("a", "s", 1, &[0; 2], Some(&g), Some(4), &[&g]);
    ds.entry("b", "s", 2, &[0; 2], Some(&g), Some(4), &[&g]);
    assert!(matches!(
        run_roc(&ds.manifest(), &["extended_dice".into()], &serial()),
        Err(xdice::Error::UndefinedMetric(_))
    ));
    ds.entry("c", "s", 3, &[0; 2], Some(&g), None, &[&g]);
    assert!(run_roc(&ds.manifest(), &["extended_dice".into()], &serial()).is_err());
}

#[test]
fn loss_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    let inner = m(3, 1, &[(0, 0)]);
    let outer = m(3, 1, &[(0, 0), (0, 1)]);
    fs::write(p("i.pgm"), encode_pgm(3, 1, &mask_pixels(&inner))).unwrap();
    fs::write(p("o.pgm"), encode_pgm(3, 1, &mask_pixels(&outer))).unwrap();

    fs::write(p("bin.grid"), format_grid(3, 1, &[0.0, 1.0, 1.0])).unwrap();
    let r = run_loss(&p("bin.grid"), &p("i.pgm"), &p("o.pgm")).unwrap();
    let metric = extended_dice(
        &m(3, 1, &[(0, 1), (0, 2)]),
        &AcceptableRegion::new(inner, outer).unwrap(),
    )
    .unwrap();
    assert!((r.value - (1.0 - metric)).abs() < 1e-12);
    write_gradient(&p("g.grid"), &r).unwrap();
    let g = load_grid(&p("g.grid")).unwrap();
    assert_eq!(g.values, r.gradient);

    fs::write(p("inside.grid"), format_grid(3, 1, &[1.0, 0.3, 0.0])).unwrap();
    assert_eq!(
        run_loss(&p("inside.grid"), &p("i.pgm"), &p("o.pgm"))
            .unwrap()
            .value,
        0.0
    );

    fs::write(p("soft.grid"), format_grid(3, 1, &[0.2, 0.7, 0.4])).unwrap();
    assert!(run_grad_check(&p("soft.grid"), &p("i.pgm"), &p("o.pgm"), 1e-6).unwrap() < 1e-5);

    fs::write(p("bad.grid"), "3 1\n0.1 x 0.2\n").unwrap();
    let err = run_loss(&p("bad.grid"), &p("i.pgm"), &p("o.pgm")).unwrap_err();
    assert!(err.to_string().contains("bad.grid:2:"), "{err}");

    // inner/outer swapped violates containment
    assert!(run_loss(&p("soft.grid"), &p("o.pgm"), &p("i.pgm")).is_err());
}

#[test]
fn synthetic_dataset_parallel_equals_serial() {
    let dir = tempfile::tempdir().unwrap();
    let manifest_path = write_dataset(dir.path(), &SynthConfig::default()).unwrap();
    let manifest = DatasetManifest::load(&manifest_path).unwrap();
    let a = run_eval(&manifest, &serial()).unwrap();
    let b = run_eval(
        &manifest,
        &Options {
            jobs: 8,
            ..Options::default()
        },
    )
    .unwrap();
    assert_eq!(a, b);
    assert_eq!(a.to_csv().unwrap(), b.to_csv().unwrap());
    assert_eq!(a.to_json(), b.to_json());
    assert_eq!(manifest.entries.len(), 20);
}
