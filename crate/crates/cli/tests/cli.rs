use std::process::{Command, Output};

fn bosonkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bosonkit")).args(args).output().expect("run bosonkit")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).expect("utf8")
}

#[test]
fn normal_order_examples() {
    for method in ["wick", "stirling", "both"] {
        let o = bosonkit(&["--method", method, "no", "a ad a a ad a"]);
        assert!(o.status.success());
        assert_eq!(stdout(&o), "ad^2 a^4 + 4 ad a^3 + 2 a^2\n");
        assert_eq!(stdout(&bosonkit(&["--method", method, "no", "(ad a)^3"])), "ad^3 a^3 + 3 ad^2 a^2 + ad a\n");
        assert_eq!(stdout(&bosonkit(&["--method", method, "no", "ad a"])), "ad a\n");
    }
}

#[test]
fn exit_codes() {
    assert_eq!(bosonkit(&["no", "a ad +"]).status.code(), Some(2));
    assert_eq!(bosonkit(&["no", "a^-1"]).status.code(), Some(2));
    assert_eq!(bosonkit(&["--frobnicate", "no", "a"]).status.code(), Some(2));
    assert_eq!(bosonkit(&["triangle", "pascal", "4"]).status.code(), Some(2));
    assert_eq!(bosonkit(&["figures", "bogus", "/tmp"]).status.code(), Some(2));
    assert_eq!(bosonkit(&["verify", "nothing"]).status.code(), Some(2));
    let cap = bosonkit(&["no", "a^70"]);
    assert_eq!(cap.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&cap.stderr).contains("resource cap"));
    assert_eq!(bosonkit(&["--method", "stirling", "no", "a^70"]).status.code(), Some(3));
}

#[test]
fn triangles() {
    let rs11 = stdout(&bosonkit(&["triangle", "rs:1:1", "5"]));
    let classic = stdout(&bosonkit(&["triangle", "classic", "5"]));
    assert_eq!(rs11.replace("rs:1:1", "classic"), classic);
    assert!(classic.starts_with("family,n,k,value\nclassic,1,1,1\n"));
    assert!(classic.contains("\n\nfamily,n,bell\n"));
    assert!(classic.ends_with("classic,5,52\n"));
    // labels with commas are quoted
    let h = stdout(&bosonkit(&["triangle", "homog:1:0=1,1=1", "2"]));
    assert!(h.contains("\"homog:1:0=1,1=1\",1,0,1\n"), "{h}");
    let w = stdout(&bosonkit(&["triangle", "word:a ad a", "3"]));
    assert!(w.contains("bell"));
    let d = stdout(&bosonkit(&["triangle", "deformed:so3", "4"]));
    assert!(d.contains("deformed:so3,4,2,7N^2-19N+13\n"), "{d}");
    let g = stdout(&bosonkit(&["triangle", "deformed:general", "3"]));
    assert!(g.contains("deformed:general,3,2,2[N]-[N-1]-[N-2]\n"), "{g}");
}

#[test]
fn determinism_and_parallel_output() {
    let a = bosonkit(&["verify", "oracle"]);
    let b = bosonkit(&["--parallel", "verify", "oracle"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let dir = std::env::temp_dir().join(format!("bosonkit-fig-{}", std::process::id()));
    let (seq, par) = (dir.join("seq"), dir.join("par"));
    assert!(bosonkit(&["figures", "mandel", seq.to_str().unwrap()]).status.success());
    assert!(bosonkit(&["--parallel", "figures", "mandel", par.to_str().unwrap()]).status.success());
    let s = std::fs::read(seq.join("fig_mandel.csv")).unwrap();
    assert_eq!(s, std::fs::read(par.join("fig_mandel.csv")).unwrap());
    let text = String::from_utf8(s).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("r,p,x,Q"));
    for line in lines {
        let q: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!(q > 0.0, "{line}");
    }
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn figure_schemas() {
    let dir = std::env::temp_dir().join(format!("bosonkit-all-{}", std::process::id()));
    let o = bosonkit(&["--parallel", "figures", "all", dir.to_str().unwrap()]);
    assert!(o.status.success());
    let expect = [
        ("weight", "r,x,W"),
        ("mandel", "r,p,x,Q"),
        ("mandel0", "r,p,x,Q"),
        ("squeeze", "r,rez,SQ,SP"),
        ("squeeze0", "r,rez,SQ,SP"),
        ("snr", "r,rez,sigma_bar"),
        ("metric", "r,x,omega"),
    ];
    for (name, header) in expect {
        let text = std::fs::read_to_string(dir.join(format!("fig_{name}.csv"))).unwrap();
        assert_eq!(text.lines().next(), Some(header));
        assert!(text.lines().count() > 100, "{name}");
    }
    let weight = std::fs::read_to_string(dir.join("fig_weight.csv")).unwrap();
    let rs: std::collections::BTreeSet<&str> = weight.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(rs.into_iter().collect::<Vec<_>>(), ["1", "2", "3", "4"]);
    let mandel0 = std::fs::read_to_string(dir.join("fig_mandel0.csv")).unwrap();
    let r2: Vec<f64> = mandel0
        .lines()
        .skip(1)
        .filter(|l| l.starts_with("2,"))
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert!(r2.iter().any(|&q| q < 0.0) && r2.iter().any(|&q| q > 0.0));
    std::fs::remove_dir_all(&dir).ok();
    // a file where the directory should be
    let file = std::env::temp_dir().join(format!("bosonkit-file-{}", std::process::id()));
    std::fs::write(&file, "x").unwrap();
    let o = bosonkit(&["figures", "snr", file.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains(file.to_str().unwrap()));
    std::fs::remove_file(&file).ok();
}

#[test]
fn verify_suites_pass() {
    for suite in ["oracle", "sheffer", "moments"] {
        let o = bosonkit(&["verify", suite]);
        assert!(o.status.success(), "{suite}: {}", stdout(&o));
        assert!(stdout(&o).ends_with("failed=0\n"));
    }
}

#[test]
fn other_subcommands() {
    let e = stdout(&bosonkit(&["--order", "5", "egf", "classic"]));
    assert_eq!(e, "n,numerator,denominator\n0,1,1\n1,1,1\n2,2,1\n3,5,1\n4,15,1\n5,52,1\n");
    let e = stdout(&bosonkit(&["--order", "2", "egf", "classic", "--x", "1/2"]));
    assert_eq!(e, "n,numerator,denominator\n0,1,1\n1,1,2\n2,3,4\n");
    let s = stdout(&bosonkit(&["sheffer", "catalog", "bell"]));
    assert!(s.contains("raising: X*(D+1) + (0)"), "{s}");
    assert!(s.contains("s_3: x^3+3x^2+x"), "{s}");
    let f = stdout(&bosonkit(&["--order", "6", "sheffer", "flow", "--q", "1,2,2", "--center", "1"]));
    assert!(f.contains("sequence: 1,1,3,13,73,501,4051"), "{f}");
    let d = stdout(&bosonkit(&["deformed", "canonical", "3", "--at", "-2"]));
    assert!(d.contains("S(3,2) = 3\n"));
    assert_eq!(bosonkit(&["deformed", "so3", "4", "--at", "2"]).status.code(), Some(2));
    let b = stdout(&bosonkit(&["coherent", "bell", "--r", "4", "--n", "4"]));
    assert!(b.starts_with("exact = 465\n"), "{b}");
    let m = stdout(&bosonkit(&["coherent", "mandel", "--r", "1", "--p", "1", "--x", "2"]));
    assert!(m.starts_with("Q = "));
    let q = stdout(&bosonkit(&["coherent", "moment", "--r", "3", "--n", "2"]));
    assert!(q.contains("rel_err"));
}
