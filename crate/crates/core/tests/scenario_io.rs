use std::fs;
use std::path::Path;

use bessplan::scenario::{load_dir, load_scenarios, save_scenarios, synthesize_scenarios, SynthParams};
use bessplan::{Error, MarketId};

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

/// Two hours of one scenario at 30-minute resolution.
fn tiny(dir: &Path) {
    write(
        dir,
        "frequency.csv",
        "scenario_id,minute,freq_hz\na,1,50.0\na,31,49.9\na,61,50.05\na,91,50.0\n",
    );
    let mut prices = String::from("scenario_id,hour,market,threshold_price,balancing_up,balancing_down\n");
    for h in 1..=2 {
        for m in ["FCRN", "FCRD", "SDCH", "SCH"] {
            prices.push_str(&format!("a,{h},{m},{}.5,60,20\n", h * 10));
        }
    }
    write(dir, "prices.csv", &prices);
}

#[test]
fn synthetic_week_round_trips_bit_exactly() {
    let set = synthesize_scenarios(1, 7, &SynthParams::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_scenarios(&set, dir.path()).unwrap();
    let back = load_dir(dir.path()).unwrap();
    assert_eq!(back, set);
    assert_eq!(back.len(), 7);
    assert_eq!(back.horizon_hours(), 24);
}

#[test]
fn bundled_week_is_the_seed_one_synthesis() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/synthetic-week");
    let bundled = load_dir(&dir).unwrap();
    assert_eq!(bundled, synthesize_scenarios(1, 7, &SynthParams::default()).unwrap());
}

#[test]
fn same_seed_same_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let params = SynthParams::default();
    save_scenarios(&synthesize_scenarios(9, 2, &params).unwrap(), a.path()).unwrap();
    save_scenarios(&synthesize_scenarios(9, 2, &params).unwrap(), b.path()).unwrap();
    for name in ["frequency.csv", "prices.csv", "probabilities.csv"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn missing_probabilities_mean_uniform_weights() {
    let dir = tempfile::tempdir().unwrap();
    tiny(dir.path());
    let set = load_dir(dir.path()).unwrap();
    assert_eq!(set.len(), 1);
    assert_eq!(set.step_minutes(), 30);
    assert_eq!(set.horizon_hours(), 2);
    let sc = set.get(0);
    assert_eq!(sc.probability, 1.0);
    assert_eq!(sc.frequency.samples, vec![50.0, 49.9, 50.05, 50.0]);
    assert_eq!(sc.prices.threshold(1, MarketId::SpotCharge), 20.5);

    let hourly = set.resample(60).unwrap();
    assert!((hourly.get(0).frequency.samples[0] - 49.95).abs() < 1e-12);
}

#[test]
fn wrong_header_reports_line_one() {
    let dir = tempfile::tempdir().unwrap();
    tiny(dir.path());
    write(dir.path(), "frequency.csv", "scenario,minute,freq_hz\na,1,50.0\n");
    match load_dir(dir.path()).unwrap_err() {
        Error::Parse { line, path, .. } => {
            assert_eq!(line, 1);
            assert!(path.ends_with("frequency.csv"));
        }
        e => panic!("unexpected {e}"),
    }
}

#[test]
fn bad_number_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    tiny(dir.path());
    write(
        dir.path(),
        "frequency.csv",
        "scenario_id,minute,freq_hz\na,1,50.0\na,31,fifty\na,61,50.05\na,91,50.0\n",
    );
    match load_dir(dir.path()).unwrap_err() {
        Error::Parse { line, .. } => assert_eq!(line, 3),
        e => panic!("unexpected {e}"),
    }
}

#[test]
fn probabilities_must_sum_to_one() {
    let dir = tempfile::tempdir().unwrap();
    tiny(dir.path());
    write(dir.path(), "probabilities.csv", "scenario_id,probability\na,0.8\n");
    assert!(matches!(load_dir(dir.path()).unwrap_err(), Error::Validation { .. }));
}

#[test]
fn missing_hour_is_an_incomplete_day() {
    let dir = tempfile::tempdir().unwrap();
    tiny(dir.path());
    let text = fs::read_to_string(dir.path().join("prices.csv")).unwrap();
    let kept: String = text.lines().filter(|l| !l.starts_with("a,2,SCH")).map(|l| format!("{l}\n")).collect();
    write(dir.path(), "prices.csv", &kept);
    let err = load_dir(dir.path()).unwrap_err();
    assert!(matches!(err, Error::Validation { ref field, .. } if field == "market"), "{err}");
}

#[test]
fn uneven_minutes_rejected() {
    let dir = tempfile::tempdir().unwrap();
    tiny(dir.path());
    write(
        dir.path(),
        "frequency.csv",
        "scenario_id,minute,freq_hz\na,1,50.0\na,31,49.9\na,71,50.05\na,91,50.0\n",
    );
    assert!(matches!(load_dir(dir.path()).unwrap_err(), Error::Validation { .. }));
}

#[test]
fn missing_file_is_io() {
    let dir = tempfile::tempdir().unwrap();
    let err = load_scenarios(&dir.path().join("nope.csv"), &dir.path().join("prices.csv"), None).unwrap_err();
    assert!(matches!(err, Error::Io { .. }), "{err}");
}
