mod common;

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use common::*;
use ner_workbench::export::ExportBundle;
use ner_workbench_core::backends::AnnotateRequest;
use ner_workbench_core::Project;
use serde_json::Value;

fn ner_wb() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ner-wb"));
    cmd.env_remove("NER_WB_STORE")
        .env_remove("NER_WB_ANNOTATOR")
        .env_remove("NER_WB_PORT")
        .env_remove("NER_WB_MAX_DOCUMENTS");
    cmd
}

fn run(args: &[&str]) -> Output {
    ner_wb().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

struct Corpus {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Corpus {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        fs::create_dir(root.join("chapters")).unwrap();
        for (name, text) in corpus_chapters() {
            fs::write(root.join("chapters").join(name), text).unwrap();
        }
        fs::write(root.join("chapters").join("notes.md"), "not a chapter").unwrap();
        fs::write(root.join("xiyouji.csv"), JOURNEY_DEFINITION).unwrap();
        Corpus { _dir: dir, root }
    }

    fn path(&self, rel: &str) -> String {
        self.root.join(rel).display().to_string()
    }
}

#[test]
fn annotate_writes_one_bundle_per_document() {
    let c = Corpus::new();
    let out = run(&["annotate", "--in", &c.path("chapters"), "--dict", &c.path("xiyouji.csv"), "--out", &c.path("out")]);
    assert!(out.status.success(), "{}", stderr(&out));
    for ch in ["059", "060", "061"] {
        let zip = fs::read(c.root.join("out").join(ch).join("data.zip")).unwrap();
        ExportBundle::from_zip(ch, &zip).unwrap();
    }
    let text = stdout(&out);
    assert!(text.contains("== 059.txt =="), "{text}");
    let line = text.lines().find(|l| l.contains("行者")).unwrap();
    assert!(line.split_whitespace().any(|w| w == "82"), "{line}");
}

#[test]
fn no_inputs_is_a_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["annotate", "--in", &dir.path().display().to_string()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("no documents"));
    let out = run(&["annotate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("no documents"));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(run(&["annotate", "--bogus"]).status.code(), Some(2));
    assert_eq!(run(&[]).status.code(), Some(2));
    assert_eq!(run(&["stats"]).status.code(), Some(2));
    assert_eq!(run(&["stats", "--snapshot", "x", "--project", "y"]).status.code(), Some(2));
    assert_eq!(run(&["stats", "--snapshot", "x", "--view", "series"]).status.code(), Some(2));
}

#[test]
fn unreadable_snapshot_is_a_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.json");
    fs::write(&path, "{").unwrap();
    let out = run(&["stats", "--snapshot", &path.display().to_string()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("corrupt snapshot"));
}

fn annotate_into_store(c: &Corpus, id: &str) {
    let out = run(&[
        "--store-root",
        &c.path("store"),
        "annotate",
        "--in",
        &c.path("chapters"),
        "--dict",
        &c.path("xiyouji.csv"),
        "--project-id",
        id,
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
}

#[test]
fn stats_filters_by_class() {
    let c = Corpus::new();
    annotate_into_store(&c, "xyj");
    let out = run(&[
        "--store-root", &c.path("store"), "--format", "json", "stats", "--project", "xyj", "--doc", "059.txt",
        "--mode", "class", "--ids", "PERSON",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let rows: Value = serde_json::from_str(&stdout(&out)).unwrap();
    let rows = rows.as_array().unwrap();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r["class_label"] == "PERSON"));

    let out = run(&["--store-root", &c.path("store"), "stats", "--project", "xyj", "--doc", "059.txt", "--mode", "class", "--ids", "PERSON"]);
    let text = stdout(&out);
    assert!(text.contains("行者") && !text.contains("火焰山"), "{text}");

    let out = run(&["--store-root", &c.path("store"), "stats", "--project", "xyj"]);
    assert_eq!(out.status.code(), Some(2), "several documents need --doc");

    let out = run(&["--store-root", &c.path("store"), "stats", "--project", "xyj", "--view", "series", "--target", "E2"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("059.txt"));
}

#[test]
fn stats_on_an_empty_document_prints_an_empty_table() {
    let dir = tempfile::tempdir().unwrap();
    let mut p = Project::new("empty", "empty");
    p.add_document("blank.txt", "").unwrap();
    let snap = dir.path().join("empty.json");
    ner_workbench::store::save_snapshot(&snap, &p).unwrap();
    let out = run(&["stats", "--snapshot", &snap.display().to_string()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(stdout(&out).lines().count(), 2);
    let out = run(&["--format", "json", "stats", "--snapshot", &snap.display().to_string(), "--view", "overview"]);
    assert_eq!(stdout(&out), "[]\n");
}

#[test]
fn export_subcommand_matches_annotate_bundles() {
    let c = Corpus::new();
    let out = run(&[
        "--store-root", &c.path("store"), "annotate", "--in", &c.path("chapters"), "--dict", &c.path("xiyouji.csv"),
        "--project-id", "xyj", "--out", &c.path("a"),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let out = run(&["--store-root", &c.path("store"), "export", "--project", "xyj", "--doc", "060.txt", "--out", &c.path("b")]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(fs::read(c.root.join("a/060/data.zip")).unwrap(), fs::read(c.root.join("b/060/data.zip")).unwrap());
    assert!(!c.root.join("b/059").exists());

    let out = run(&["--store-root", &c.path("store"), "export", "--project", "xyj", "--doc", "999.txt", "--out", &c.path("b")]);
    assert_eq!(out.status.code(), Some(1));

    let again = run(&["--store-root", &c.path("store"), "annotate", "--in", &c.path("chapters"), "--project-id", "xyj"]);
    assert_eq!(again.status.code(), Some(1), "existing projects are not overwritten");
}

#[test]
fn too_many_documents_is_refused() {
    let c = Corpus::new();
    let out = run(&["annotate", "--in", &c.path("chapters"), "--max-documents", "2"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("too many documents"));
    let out = run(&["annotate", "--in", &c.path("chapters"), "--max-documents", "0"]);
    assert!(out.status.success());
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn external_backend_matches_offline_prediction_import() {
    let url = spawn_mock_annotator().await;
    let c = Corpus::new();

    let mut project = Project::new("tmp", "tmp");
    project.add_documents(corpus_chapters(), None).unwrap();
    let saved = mock_predictions(&AnnotateRequest::for_project(&project));
    fs::write(c.root.join("predictions.json"), serde_json::to_vec(&saved).unwrap()).unwrap();

    let root = c.root.clone();
    let (online, offline) = tokio::task::spawn_blocking(move || {
        let chapters = root.join("chapters").display().to_string();
        let online = ner_wb()
            .args(["annotate", "--in", &chapters, "--backend", "external", "--annotator-url", &url])
            .arg("--out")
            .arg(root.join("online"))
            .output()
            .unwrap();
        let offline = ner_wb()
            .args(["annotate", "--in", &chapters, "--predictions"])
            .arg(root.join("predictions.json"))
            .arg("--out")
            .arg(root.join("offline"))
            .output()
            .unwrap();
        (online, offline)
    })
    .await
    .unwrap();
    assert!(online.status.success(), "{}", stderr(&online));
    assert!(offline.status.success(), "{}", stderr(&offline));
    for ch in ["059", "060", "061"] {
        let a = fs::read(c.root.join("online").join(ch).join("data.zip")).unwrap();
        let b = fs::read(c.root.join("offline").join(ch).join("data.zip")).unwrap();
        assert_eq!(a, b, "{ch}");
    }
    let bundle = ExportBundle::from_zip("059", &fs::read(c.root.join("online/059/data.zip")).unwrap()).unwrap();
    assert!(String::from_utf8(bundle.entity_csv).unwrap().contains(",芭蕉扇,PRODUCT,14,"));
}

#[test]
fn external_backend_needs_a_url() {
    let c = Corpus::new();
    let out = run(&["annotate", "--in", &c.path("chapters"), "--backend", "external"]);
    assert_eq!(out.status.code(), Some(2));
    let out = ner_wb()
        .args(["annotate", "--in", &c.path("chapters"), "--backend", "external"])
        .env("NER_WB_ANNOTATOR", "http://127.0.0.1:9")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("annotator unreachable"), "{}", stderr(&out));
}

fn free_port() -> u16 {
    std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

fn wait_for_health(port: u16) -> bool {
    let deadline = Instant::now() + Duration::from_secs(10);
    while Instant::now() < deadline {
        if let Ok(mut s) = std::net::TcpStream::connect(("127.0.0.1", port)) {
            use std::io::{Read, Write};
            let _ = s.write_all(b"GET /health HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n");
            let mut buf = String::new();
            let _ = s.read_to_string(&mut buf);
            if buf.contains("{\"status\":\"ok\"}") {
                return true;
            }
        }
        std::thread::sleep(Duration::from_millis(50));
    }
    false
}

#[test]
fn serve_starts_and_reports_busy_ports() {
    let dir = tempfile::tempdir().unwrap();
    let port = free_port();
    let mut child = ner_wb()
        .args(["serve", "--port", &port.to_string()])
        .env("NER_WB_STORE", dir.path())
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let healthy = wait_for_health(port);

    let busy = run(&["--store-root", &dir.path().display().to_string(), "serve", "--port", &port.to_string()]);
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(healthy);
    assert_eq!(busy.status.code(), Some(1));
    assert!(stderr(&busy).contains("already in use"), "{}", stderr(&busy));
}

#[test]
fn serve_rejects_a_bad_annotator_url() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["--store-root", &dir.path().display().to_string(), "serve", "--port", "0", "--annotator-url", "ftp://x"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("bad configuration"));
}
