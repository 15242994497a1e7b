mod common;

use std::path::Path;
use std::process::{Command, Output};

use onmf::imaging::{ColorImage, GrayImage};
use onmf::io::{persist, png};

fn onmf(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_onmf")).args(args).current_dir(cwd).output().expect("spawn onmf")
}

fn assert_ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

fn write_weather(dir: &Path, len: usize) {
    let mut series = common::weather_series(len);
    for t in (3..len).step_by(17) {
        series[1][t] = None;
    }
    let csv = common::series_csv(&["la", "sf", "nyc", "chi"], &series);
    // One sentinel-coded gap as well, at t = 10 in the first series.
    let mut lines: Vec<String> = csv.lines().map(str::to_string).collect();
    let row: Vec<&str> = lines[11].split(',').collect();
    lines[11] = format!("{},-100,{}", row[0], row[2..].join(","));
    let csv = lines.join("\n") + "\n";
    std::fs::write(dir.join("weather.csv"), csv).unwrap();
}

#[test]
fn ts_learn_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    write_weather(dir.path(), 120);
    let out = onmf(&["ts-learn", "--k", "6", "--N", "50", "--r", "16", "--lambda", "0.1", "weather.csv", "--out-dir", "o"], dir.path());
    assert_ok(&out);
    let o = dir.path().join("o");
    let state = persist::load_state(&o.join("dictionary.onmf")).unwrap();
    assert_eq!((state.dim(), state.atoms()), (24, 16));
    assert_eq!(state.samples_seen(), 120 - 49);

    let fill = std::fs::read_to_string(o.join("fillin.csv")).unwrap();
    let table = onmf::io::table::read_series_csv(fill.as_bytes(), f64::NAN).unwrap();
    assert_eq!(table.names, vec!["la", "sf", "nyc", "chi"]);
    assert!(table.series.iter().all(|s| s.len() == 120 && s.iter().all(Option::is_some)));

    let recon = std::fs::read_to_string(o.join("reconstruction.csv")).unwrap();
    let table = onmf::io::table::read_series_csv(recon.as_bytes(), f64::NAN).unwrap();
    assert!(table.series[0][..49].iter().all(Option::is_none));
    assert!(table.series[0][49..].iter().all(Option::is_some));

    let meta = onmf::io::table::parse_metadata(&std::fs::read_to_string(o.join("metadata.txt")).unwrap()).unwrap();
    for key in ["offset", "k", "N", "r", "lambda", "seed"] {
        assert!(meta.contains_key(key), "missing {key}");
    }
    assert_eq!(meta["k"], "6");
}

#[test]
fn ts_inpaint_with_stored_dictionary() {
    let dir = tempfile::tempdir().unwrap();
    write_weather(dir.path(), 100);
    assert_ok(&onmf(&["ts-learn", "--r", "8", "weather.csv", "--out-dir", "learn"], dir.path()));
    let out = onmf(&["ts-inpaint", "weather.csv", "--dict", "learn/dictionary.onmf", "--out-dir", "fill"], dir.path());
    assert_ok(&out);
    let fill = std::fs::read_to_string(dir.path().join("fill/fillin.csv")).unwrap();
    let table = onmf::io::table::read_series_csv(fill.as_bytes(), f64::NAN).unwrap();
    assert!(table.series[1].iter().all(Option::is_some));
    // Observed entries are copied verbatim.
    let orig = std::fs::read_to_string(dir.path().join("weather.csv")).unwrap();
    let orig = onmf::io::table::read_series_csv(orig.as_bytes(), -100.0).unwrap();
    for (a, b) in orig.series[0].iter().zip(&table.series[0]) {
        if let Some(a) = a {
            assert!((a - b.unwrap()).abs() < 1e-9);
        }
    }
}

#[test]
fn ts_errors_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("empty.csv"), "").unwrap();
    let out = onmf(&["ts-learn", "empty.csv"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));

    std::fs::write(dir.path().join("bad.csv"), "time,a\n0,1\n1,oops\n").unwrap();
    let out = onmf(&["ts-learn", "bad.csv"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    write_weather(dir.path(), 30);
    let out = onmf(&["ts-learn", "--N", "50", "weather.csv", "--out-dir", "o"], dir.path());
    assert_eq!(out.status.code(), Some(3));

    let out = onmf(&["ts-learn", "missing.csv"], dir.path());
    assert_eq!(out.status.code(), Some(1));

    let out = onmf(&["ts-learn", "--k", "oops", "weather.csv"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn image_commands() {
    let dir = tempfile::tempdir().unwrap();
    let img = common::textured_image(40, 36);
    png::write_color_png(&dir.path().join("tex.png"), &img).unwrap();
    let train = ["img-train", "tex.png", "--p", "8", "--r", "12", "--batches", "3", "--batch-size", "50"];
    assert_ok(&onmf(&[&train[..], &["--out", "d.onmf", "--grid", "grid.png"]].concat(), dir.path()));
    let state = persist::load_state(&dir.path().join("d.onmf")).unwrap();
    assert_eq!((state.dim(), state.atoms()), (192, 12));
    assert!(dir.path().join("grid.png").exists());

    assert_ok(&onmf(&["img-compress", "tex.png", "--dict", "d.onmf", "--p", "8", "--overlap", "6", "--out", "c.png"], dir.path()));
    let c = png::read_color_png(&dir.path().join("c.png")).unwrap();
    assert_eq!((c.height(), c.width()), (40, 36));

    // Patch size disagreeing with the dictionary.
    let out = onmf(&["img-compress", "tex.png", "--dict", "d.onmf", "--p", "10", "--overlap", "6", "--out", "x.png"], dir.path());
    assert_eq!(out.status.code(), Some(4));
    assert!(!dir.path().join("x.png").exists());

    let gray = onmf::imaging::to_grayscale(&img);
    png::write_gray_png(&dir.path().join("gray.png"), &gray).unwrap();
    assert_ok(&onmf(&["img-restore", "gray.png", "--dict", "1=d.onmf", "--p", "8", "--overlap", "6", "--out", "r.png"], dir.path()));
    let r = png::read_color_png(&dir.path().join("r.png")).unwrap();
    assert_eq!((r.height(), r.width()), (40, 36));

    // Two classes need labels; a label file missing an anchor is a coverage error.
    let out = onmf(&["img-restore", "gray.png", "--dict", "1=d.onmf", "--dict", "2=d.onmf", "--p", "8", "--overlap", "6", "--out", "r2.png"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    std::fs::write(dir.path().join("labels.csv"), "row,col,class\n0,0,1\n").unwrap();
    let out = onmf(
        &["img-restore", "gray.png", "--dict", "1=d.onmf", "--dict", "2=d.onmf", "--labels", "labels.csv", "--p", "8", "--overlap", "6", "--out", "r2.png"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn restore_with_two_labeled_classes() {
    let dir = tempfile::tempdir().unwrap();
    // Left half green-ish, right half sand-ish.
    let img = ColorImage::from_fn(20, 20, |r, c| {
        let wave = 0.1 * ((r + c) as f64 * 0.7).sin();
        if c < 10 { [0.2 + wave, 0.6 + wave, 0.2] } else { [0.8 + wave, 0.7 + wave, 0.4] }
    })
    .unwrap();
    png::write_color_png(&dir.path().join("scene.png"), &img).unwrap();
    let left = ColorImage::from_fn(20, 10, |r, c| img.pixel(r, c)).unwrap();
    let right = ColorImage::from_fn(20, 10, |r, c| img.pixel(r, c + 10)).unwrap();
    png::write_color_png(&dir.path().join("grass.png"), &left).unwrap();
    png::write_color_png(&dir.path().join("sand.png"), &right).unwrap();
    for name in ["grass", "sand"] {
        let out = onmf(
            &["img-train", &format!("{name}.png"), "--p", "5", "--r", "5", "--batches", "5", "--batch-size", "100", "--out", &format!("{name}.onmf")],
            dir.path(),
        );
        assert_ok(&out);
    }
    let grid = onmf::imaging::PatchGrid::with_overlap(20, 20, 5, 4).unwrap();
    let mut labels = String::from("row,col,class\n");
    for &(r, c) in &grid.anchors {
        labels.push_str(&format!("{r},{c},{}\n", if c + 2 < 10 { 1 } else { 2 }));
    }
    std::fs::write(dir.path().join("labels.csv"), labels).unwrap();
    let gray: GrayImage = onmf::imaging::to_grayscale(&img);
    png::write_gray_png(&dir.path().join("gray.png"), &gray).unwrap();
    let out = onmf(
        &["img-restore", "gray.png", "--dict", "1=grass.onmf", "--dict", "2=sand.onmf", "--labels", "labels.csv", "--p", "5", "--overlap", "4", "--out", "restored.png"],
        dir.path(),
    );
    assert_ok(&out);
    let restored = png::read_color_png(&dir.path().join("restored.png")).unwrap();
    // Restored greens dominate on the left, reds on the right.
    let (l, r) = (restored.pixel(10, 2), restored.pixel(10, 17));
    assert!(l[1] > l[0], "{l:?}");
    assert!(r[0] > l[0], "{l:?} {r:?}");
}

#[test]
fn video_commands() {
    let dir = tempfile::tempdir().unwrap();
    common::write_frames(&dir.path().join("candle"), &common::candle_frames(16, 8, 12));
    let out = onmf(&["video-dict", "--frames", "candle", "--r", "4", "--mode", "online", "--snapshots", "1,5,7", "--out-dir", "atoms"], dir.path());
    assert_ok(&out);
    let atoms = dir.path().join("atoms");
    for prefix in ["", "snapshot_1_", "snapshot_5_", "snapshot_7_"] {
        for j in 0..4 {
            let img = png::read_gray_png(&atoms.join(format!("{prefix}atom_{j}.png"))).unwrap();
            assert_eq!((img.height(), img.width()), (16, 8));
        }
        assert!(atoms.join(format!("{prefix}grid.png")).exists());
    }
    assert_ok(&onmf(&["video-dict", "--frames", "candle", "--r", "2", "--mode", "offline", "--iters", "50", "--out-dir", "off"], dir.path()));
    assert!(dir.path().join("off/atom_1.png").exists());

    let stack = common::candle_then_noise(16, 8, 10, 10, 3);
    common::write_frames(&dir.path().join("mixed"), &stack);
    let out = onmf(&["video-changepoint", "--frames", "mixed", "--r", "3", "--out", "report.csv"], dir.path());
    assert_ok(&out);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.starts_with("changepoint="), "{stdout}");
    let report = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert!(report.starts_with("boundary,score\n"));
    assert_eq!(report.lines().count(), 1 + 19);

    common::write_frames(&dir.path().join("one"), &common::candle_frames(16, 8, 1));
    let out = onmf(&["video-changepoint", "--frames", "one", "--r", "1", "--out", "x.csv"], dir.path());
    assert_eq!(out.status.code(), Some(3));

    let odd = dir.path().join("odd");
    common::write_frames(&odd, &common::candle_frames(16, 8, 3));
    png::write_gray_png(&odd.join("frame_9999.png"), &GrayImage::new(4, 4, vec![0.0; 16]).unwrap()).unwrap();
    let out = onmf(&["video-changepoint", "--frames", "odd", "--r", "1", "--out", "x.csv"], dir.path());
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn render_layouts() {
    let dir = tempfile::tempdir().unwrap();
    write_weather(dir.path(), 70);
    assert_ok(&onmf(&["ts-learn", "--r", "16", "weather.csv", "--out-dir", "o"], dir.path()));
    assert_ok(&onmf(&["render", "--dict", "o/dictionary.onmf", "--layout", "temporal", "--series", "4", "--out", "t.png"], dir.path()));
    let img = png::read_color_png(&dir.path().join("t.png")).unwrap();
    assert_eq!(img.height(), img.width());
    let out = onmf(&["render", "--dict", "o/dictionary.onmf", "--layout", "hexagon", "--out", "h.png"], dir.path());
    assert_eq!(out.status.code(), Some(4));
    let out = onmf(&["render", "--dict", "o/dictionary.onmf", "--layout", "patch", "--p", "3", "--out", "h.png"], dir.path());
    assert_eq!(out.status.code(), Some(4));
}
