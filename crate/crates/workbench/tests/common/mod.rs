#![allow(dead_code)]

use std::collections::BTreeMap;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::routing::post;
use axum::{Json, Router};
use http_body_util::BodyExt;
use ner_workbench_core::backends::{AnnotateRequest, AnnotateResponse, DocumentPredictions, SpanPrediction};
use ner_workbench_core::{InstanceId, Project};
use tower::ServiceExt;

pub mod scope;

/// Surface, class, frequency for a court-case novel chapter.
pub const CASE_FILE: &[(&str, &str, u64)] = &[
    ("包公", "PERSON", 20),
    ("第一", "ORDINAL", 1),
    ("一", "CARDINAL", 24),
    ("189", "CARDINAL", 1),
    ("德安府", "GPE", 1),
    ("孝感縣", "GPE", 1),
    ("獻忠", "PERSON", 13),
    ("十八", "CARDINAL", 1),
    ("蕭鍾漢", "PERSON", 6),
    ("淑玉", "PERSON", 13),
    ("十七歲", "DATE", 1),
    ("許生", "PERSON", 12),
    ("兩", "CARDINAL", 5),
    ("連夜", "TIME", 5),
    ("半夜", "DATE", 2),
    ("一夜", "TIME", 1),
    ("明早", "PERSON", 10),
    ("今夜", "TIME", 1),
    ("許獻忠", "PERSON", 6),
    ("昨夜", "TIME", 2),
    ("蕭美", "PERSON", 1),
    ("蕭淑玉", "PERSON", 1),
    ("王忠", "PERSON", 4),
];

/// Surface, class, frequency for one chapter of the pilgrimage novel.
pub const JOURNEY: &[(&str, &str, u64)] = &[
    ("三藏", "PERSON", 16),
    ("火焰山", "LOC", 11),
    ("行者", "PERSON", 82),
    ("芭蕉扇", "WEAPON", 14),
    ("菩薩", "PERSON", 12),
    ("八戒", "PERSON", 13),
    ("沙僧", "PERSON", 9),
    ("大聖", "PERSON", 14),
    ("悟空", "PERSON", 8),
    ("金箍棒", "WEAPON", 1),
    ("白馬", "PERSON", 1),
    ("翠雲山", "LOC", 6),
    ("芭蕉洞", "LOC", 5),
    ("公主", "PERSON", 5),
    ("牛魔王", "PERSON", 4),
    ("崑崙山", "LOC", 1),
];

pub const JOURNEY_DEFINITION: &str = "Class_Label,Class_Description,Instance_List\n\
PERSON,人物,\"三藏, 悟空, 行者, 大聖, 八戒, 沙僧, 白馬, 牛王, 牛魔王, 公主, 羅剎, 菩薩\"\n\
WEAPON,武器,\"芭蕉扇, 金箍棒\"\n\
LOC,地理區,\"火焰山, 翠雲山, 崑崙山, 峨眉山, 芭蕉洞\"\n";

pub const CASE_DOC: &str = "case.txt";
pub const JOURNEY_DOC: &str = "059.txt";

/// Each surface repeated `freq` times, interleaved round-robin, every token
/// followed by `。` (never part of a surface), so the expected counts can be
/// read off by splitting on `。`.
pub fn synthetic_text(entries: &[(&str, &str, u64)], filler: &str) -> String {
    let mut left: Vec<u64> = entries.iter().map(|e| e.2).collect();
    let mut text = String::new();
    while left.iter().any(|&n| n > 0) {
        for (i, (surface, _, _)) in entries.iter().enumerate() {
            if left[i] > 0 {
                left[i] -= 1;
                text.push_str(surface);
                text.push('。');
                text.push_str(filler);
            }
        }
    }
    text
}

/// Independent count for synthetic texts: split on `。` and compare tokens.
pub fn token_counts(text: &str, filler: &str) -> BTreeMap<String, u64> {
    let mut counts = BTreeMap::new();
    for token in text.split('。') {
        let token = token.strip_prefix(filler).unwrap_or(token);
        if !token.is_empty() {
            *counts.entry(token.to_string()).or_insert(0) += 1;
        }
    }
    counts
}

pub fn ensure_classes(p: &mut Project, entries: &[(&str, &str, u64)]) {
    for (_, class, _) in entries {
        if p.class(class).is_none() {
            let desc = if *class == "WEAPON" { "武器" } else { "" };
            p.create_class(class, desc).unwrap();
        }
    }
}

fn register_all(p: &mut Project, entries: &[(&str, &str, u64)]) -> Vec<InstanceId> {
    ensure_classes(p, entries);
    entries
        .iter()
        .map(|(surface, class, _)| p.register_instance(surface, class).unwrap())
        .collect()
}

pub fn case_file_project() -> Project {
    let mut p = Project::new("case", "公案");
    p.add_document(CASE_DOC, synthetic_text(CASE_FILE, "")).unwrap();
    let e = register_all(&mut p, CASE_FILE);
    p.create_group(CASE_DOC, "第一義主人公", &[e[6], e[18], e[11], e[9], e[21], e[20]]).unwrap();
    p.create_alias(CASE_DOC, "Alias_許獻忠", &[e[6], e[11], e[18]], None).unwrap();
    p.create_alias(CASE_DOC, "Alias_蕭淑玉", &[e[21], e[20], e[9]], None).unwrap();
    p.create_alias(CASE_DOC, "Alias_蕭鍾漢", &[e[8]], None).unwrap();
    p
}

pub fn journey_project() -> Project {
    let mut p = Project::new("journey", "西遊");
    p.add_document(JOURNEY_DOC, synthetic_text(JOURNEY, "卻說")).unwrap();
    let e = register_all(&mut p, JOURNEY);
    p.create_alias(JOURNEY_DOC, "孫悟空", &[e[2], e[8], e[7]], None).unwrap();
    p.create_group(JOURNEY_DOC, "悟空和芭蕉扇", &[e[2], e[8], e[3], e[7]]).unwrap();
    p
}

/// Three chapters built from the pilgrimage dictionary with different
/// counts per chapter, plus filler prose.
pub fn corpus_chapters() -> Vec<(String, String)> {
    let extra: &[(&str, &str, u64)] = &[("牛王", "PERSON", 3), ("羅剎", "PERSON", 7), ("峨眉山", "LOC", 2)];
    (0..3u64)
        .map(|k| {
            let entries: Vec<(&str, &str, u64)> = JOURNEY
                .iter()
                .chain(extra)
                .enumerate()
                .map(|(i, (s, c, f))| (*s, *c, if k == 0 { *f } else { (f * (k + 1) + i as u64) % 23 }))
                .collect();
            (format!("{:03}.txt", 59 + k), synthetic_text(&entries, "那廂"))
        })
        .collect()
}

/// Quadratic leftmost-longest: at each position take the longest pattern
/// that matches there, else move one character on.
pub fn oracle_leftmost_longest(text: &str, patterns: &[&str]) -> Vec<(usize, usize, usize)> {
    let text: Vec<char> = text.chars().collect();
    let patterns: Vec<Vec<char>> = patterns.iter().map(|p| p.chars().collect()).collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < text.len() {
        let best = patterns
            .iter()
            .enumerate()
            .filter(|(_, p)| !p.is_empty() && text[i..].starts_with(p))
            .max_by_key(|(idx, p)| (p.len(), std::cmp::Reverse(*idx)));
        match best {
            Some((idx, p)) => {
                out.push((i, i + p.len(), idx));
                i += p.len();
            }
            None => i += 1,
        }
    }
    out
}

pub async fn call(app: &Router, method: Method, uri: &str, body: Option<serde_json::Value>) -> (StatusCode, Vec<u8>) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(serde_json::to_vec(&v).unwrap())
        }
        None => Body::empty(),
    };
    send(app, req.body(body).unwrap()).await
}

pub async fn send(app: &Router, req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes)
}

pub fn json(bytes: &[u8]) -> serde_json::Value {
    serde_json::from_slice(bytes).unwrap_or_else(|e| panic!("not JSON ({e}): {}", String::from_utf8_lossy(bytes)))
}

/// Percent-encodes a path segment.
pub fn seg(s: &str) -> String {
    let mut out = String::new();
    for b in s.bytes() {
        if b.is_ascii_alphanumeric() || b"-._~".contains(&b) {
            out.push(b as char);
        } else {
            out.push_str(&format!("%{b:02X}"));
        }
    }
    out
}

/// Labels every 芭蕉扇 as PRODUCT and every 牛魔王 as MONSTER.
pub fn mock_predictions(req: &AnnotateRequest) -> AnnotateResponse {
    let predictions = req
        .documents
        .iter()
        .map(|d| {
            let chars: Vec<char> = d.text.chars().collect();
            let mut spans = Vec::new();
            for (surface, label) in [("芭蕉扇", "PRODUCT"), ("牛魔王", "MONSTER")] {
                let pat: Vec<char> = surface.chars().collect();
                for i in 0..chars.len() {
                    if chars[i..].starts_with(&pat) {
                        spans.push(SpanPrediction { start: i, end: i + pat.len(), label: label.into(), score: Some(0.9) });
                    }
                }
            }
            DocumentPredictions { doc_id: d.doc_id.clone(), spans }
        })
        .collect();
    AnnotateResponse { predictions }
}

async fn mock_annotate(Json(req): Json<AnnotateRequest>) -> Json<AnnotateResponse> {
    Json(mock_predictions(&req))
}

pub async fn spawn_mock_annotator() -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move {
        axum::serve(listener, Router::new().route("/v1/annotate", post(mock_annotate))).await.unwrap();
    });
    format!("http://{addr}")
}

pub const KILL_CHILD_ENV: &str = "NER_WB_SAVE_LOOP_TARGET";

/// A project whose snapshot is several megabytes, so a kill lands inside a
/// write often. `variant` changes one instance so old and new differ.
pub fn bulky_project(variant: bool) -> Project {
    let chapter = synthetic_text(JOURNEY, "卻說那廂");
    let mut p = Project::new("bulky", "bulky");
    p.add_document("big.txt", chapter.repeat(200)).unwrap();
    register_all(&mut p, JOURNEY);
    if variant {
        p.register_instance("那廂", "LOC").unwrap();
    }
    p
}

/// Child side: save the two variants alternately until killed.
pub fn save_forever(target: &std::path::Path) -> ! {
    let old = bulky_project(false);
    let new = bulky_project(true);
    println!("saving");
    let _ = std::io::Write::flush(&mut std::io::stdout());
    let mut flip = true;
    loop {
        ner_workbench::store::save_snapshot(target, if flip { &new } else { &old }).unwrap();
        flip = !flip;
    }
}

#[derive(Debug, Default)]
pub struct KillReport {
    pub trials: usize,
    pub saw_old: usize,
    pub saw_new: usize,
}

/// Runs `trials` rounds of: start `child` (which must call [`save_forever`]
/// on `target`), wait until it is saving, SIGKILL it after a varying delay,
/// then load `target`. Every load must give one of the two variants.
pub fn kill_during_save(
    mut child: impl FnMut() -> std::process::Command,
    target: &std::path::Path,
    trials: usize,
) -> Result<KillReport, String> {
    use std::io::BufRead;

    let old = bulky_project(false);
    let new = bulky_project(true);
    ner_workbench::store::save_snapshot(target, &old).map_err(|e| e.to_string())?;
    let mut report = KillReport::default();
    for i in 0..trials {
        let mut proc = child()
            .env(KILL_CHILD_ENV, target)
            .stdout(std::process::Stdio::piped())
            .stderr(std::process::Stdio::null())
            .spawn()
            .map_err(|e| e.to_string())?;
        let mut reader = std::io::BufReader::new(proc.stdout.take().unwrap());
        let mut line = String::new();
        loop {
            line.clear();
            let n = reader.read_line(&mut line).map_err(|e| e.to_string())?;
            if n == 0 {
                let _ = proc.kill();
                return Err("child exited before saving".into());
            }
            if line.trim_end().ends_with("saving") {
                break;
            }
        }
        std::thread::sleep(std::time::Duration::from_millis((i as u64 * 37) % 173));
        proc.kill().map_err(|e| e.to_string())?;
        proc.wait().map_err(|e| e.to_string())?;

        let loaded = ner_workbench::store::load_snapshot(target).map_err(|e| format!("trial {i}: {e}"))?;
        if loaded == old {
            report.saw_old += 1;
        } else if loaded == new {
            report.saw_new += 1;
        } else {
            return Err(format!("trial {i}: loaded a project that is neither version"));
        }
        report.trials += 1;
    }
    Ok(report)
}
