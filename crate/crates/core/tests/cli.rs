use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn score(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_score")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn conf() -> String {
    data("score.conf").display().to_string()
}

#[test]
fn route_prints_ids_and_weight_first() {
    let o = score(&["route", "--config", &conf(), "--from", "1", "--to", "6", "--time", "4000"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let first = out.lines().next().unwrap();
    let mut parts: Vec<&str> = first.split_whitespace().collect();
    let w: f64 = parts.pop().unwrap().parse().unwrap();
    assert_eq!(parts, ["1", "2", "3", "6"]);
    assert!((w - 325.58118648).abs() < 1e-6);
    assert!(out.contains("1->2"));
}

#[test]
fn route_exit_codes() {
    let c = conf();
    let no_path = score(&["route", "--config", &c, "--from", "1", "--to", "8", "--time", "4000"]);
    assert_eq!(no_path.status.code(), Some(3));
    let unknown = score(&["route", "--config", &c, "--from", "1", "--to", "99", "--time", "4000"]);
    assert_eq!(unknown.status.code(), Some(2));
    let missing = score(&["route", "--from", "1"]);
    assert_eq!(missing.status.code(), Some(1));
    let bad_flag = score(&["route", "--config", &c, "--from", "x", "--to", "6", "--time", "1"]);
    assert_eq!(bad_flag.status.code(), Some(1));
    let no_file = score(&["route", "--net", "/nonexistent/net.txt", "--from", "1", "--to", "2", "--time", "1"]);
    assert_eq!(no_file.status.code(), Some(2));
}

#[test]
fn route_with_now_succeeds() {
    let o = score(&["route", "--config", &conf(), "--from", "1", "--to", "6", "--now"]);
    assert!(o.status.success());
}

#[test]
fn alpha_only_routes_by_length() {
    let o = score(&[
        "route", "--config", &conf(), "--from", "1", "--to", "6", "--time", "4000", "--alpha", "1", "--beta", "0",
    ]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().next().unwrap(), "1 2 3 6 3000.0");
}

#[test]
fn geojson_has_route_edges_and_every_node() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("route.json");
    let o = score(&[
        "route", "--config", &conf(), "--from", "1", "--to", "6", "--time", "4000",
        "--geojson", path.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["type"], "FeatureCollection");
    let features = v["features"].as_array().unwrap();
    let lines = features.iter().filter(|f| f["geometry"]["type"] == "LineString").count();
    let points = features.iter().filter(|f| f["geometry"]["type"] == "Point").count();
    assert_eq!((lines, points), (3, 8));
}

#[test]
fn park_without_network_uses_static_irradiance() {
    let lots = data("lots.txt");
    let o = score(&["park", "--lots", lots.to_str().unwrap(), "--lat", "43.8560", "--lon", "18.3900", "--time", "4000"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.lines().next().unwrap().starts_with("21 "));
    assert!(out.lines().any(|l| l.trim_end().ends_with('*') && l.contains(" 21 ")));

    // Nearest-only ranking picks the same lot; a strong sun bias flips it.
    let far_sun = score(&[
        "park", "--lots", lots.to_str().unwrap(), "--lat", "43.8520", "--lon", "18.3935", "--time", "0", "--p-irr", "6",
    ]);
    assert!(stdout(&far_sun).starts_with("23 "));
}

#[test]
fn park_rejects_bad_exponents() {
    let lots = data("lots.txt");
    let o = score(&[
        "park", "--lots", lots.to_str().unwrap(), "--lat", "0", "--lon", "0", "--time", "1", "--p-irr", "0", "--p-dist", "0",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn park_with_network_reads_the_store() {
    let o = score(&["park", "--config", &conf(), "--lat", "43.8560", "--lon", "18.4190", "--time", "4000"]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("13 "));
}

#[test]
fn ingest_file_reports_and_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("obs.txt");
    let packets = data("packets.txt");
    let o = score(&[
        "ingest", "--config", &conf(), "--file", packets.to_str().unwrap(), "--dump", dump.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("accepted=2"), "{out}");
    assert!(out.contains("rejected=2"), "{out}");
    let text = std::fs::read_to_string(&dump).unwrap();
    assert_eq!(text.lines().count(), 2);

    // The dump feeds back into routing and moves the route into the sun.
    let r = score(&[
        "route", "--config", &conf(), "--observations", dump.to_str().unwrap(), "--from", "1", "--to", "6",
        "--time", "4000.3",
    ]);
    assert!(stdout(&r).starts_with("1 4 5 6 "));
}

#[test]
fn ingest_reads_stdin() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_score"))
        .args(["ingest", "--config", &conf()])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(b"T9SUN>SCORE:!4351.00N/01824.00E#IRR=0.5,T=10\n\nT9SUN>SCORE:!9951.00N/01824.00E#IRR=0.5,T=10\n")
        .unwrap();
    let o = child.wait_with_output().unwrap();
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("accepted=1") && out.contains("bad-coordinate=1"), "{out}");
}

#[test]
fn serve_requires_a_port() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("no-port.conf");
    std::fs::write(&cfg, format!("network = {}\noffline = {}\n", data("network.txt").display(), data("offline.txt").display())).unwrap();
    let o = score(&["serve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}
