mod common;

use std::fs;
use std::path::Path;
use std::process::Command;

use postscreen::cli::{run, EXIT_DATA, EXIT_OK, EXIT_USAGE};
use postscreen::corpus::{self, Category};
use postscreen::metrics::EvalReport;
use postscreen::pipeline::Verdict;
use postscreen::{ImageBuffer, Label, LabeledText};

const TABLE_ONE: &str = "label,text
0,\"listening to some music and just chilling....I'll probably regret not getting work done...but till then i'm just gonna kick back\"
0,i am working on my media room design and i love love love my client profile
1,more than anything I wish I could ve seen your faces and fought alongside
1,\"im going to be a professional school shooter\"
";

fn postscreen(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run(
        std::iter::once("postscreen").chain(args.iter().copied()),
        &mut out,
        &mut err,
    );
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Forty posts; concerning ones draw from a threat vocabulary, benign ones
/// from an everyday one.
fn synthetic_csv() -> String {
    let bad = ["gun", "shoot", "school", "attack", "weapon", "kill"];
    let good = ["music", "love", "coffee", "garden", "beach", "friends"];
    let mut s = String::from("label,text\n");
    for i in 0..40 {
        let (label, words) = if i % 2 == 0 { (1, &bad) } else { (0, &good) };
        let text: Vec<&str> = (0..4).map(|k| words[(i * 7 + k * 5) % 6]).collect();
        s.push_str(&format!("{label},{}\n", text.join(" ")));
    }
    s
}

#[test]
fn prep_cleans_table_one() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("table1.csv");
    fs::write(&csv, TABLE_ONE).unwrap();
    let (code, out, err) = postscreen(&["prep", "--data", p(&csv)]);
    assert_eq!(code, EXIT_OK, "{err}");
    let rows: Vec<LabeledText> = out
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(rows.len(), 4);
    let labels: Vec<Label> = rows.iter().map(|r| r.label).collect();
    assert_eq!(
        labels,
        [
            Label::Benign,
            Label::Benign,
            Label::Concerning,
            Label::Concerning
        ]
    );
    assert_eq!(rows[3].text, "im going professional school shooter");
    for r in &rows {
        assert!(!r.text.is_empty());
        assert_eq!(r.text, r.text.to_lowercase());
        assert!(r
            .text
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == ' '));
    }

    // caption preset keeps stopwords
    let (code, out, _) = postscreen(&["prep", "--data", p(&csv), "--preset", "caption"]);
    assert_eq!(code, EXIT_OK);
    assert!(out
        .lines()
        .nth(3)
        .unwrap()
        .contains("im going to be a professional school shooter"));
}

#[test]
fn train_is_byte_deterministic_and_eval_reports() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("posts.csv");
    fs::write(&csv, synthetic_csv()).unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for out in [&a, &b] {
        let (code, _, err) = postscreen(&[
            "train",
            "--data",
            p(&csv),
            "--variant",
            "cnb",
            "--split",
            "0.2",
            "--seed",
            "7",
            "--out",
            p(out),
        ]);
        assert_eq!(code, EXIT_OK, "{err}");
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let (report, roc) = (dir.path().join("report.json"), dir.path().join("roc.csv"));
    let (code, out, err) = postscreen(&[
        "eval",
        "--model",
        p(&a),
        "--data",
        p(&csv),
        "--split",
        "0.2",
        "--seed",
        "7",
        "--roc-csv",
        p(&roc),
        "--out",
        p(&report),
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(out.contains("Accuracy"), "{out}");
    let parsed: EvalReport = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    // 40 * 0.2 = 8 held out, vocabulary-separable
    assert_eq!(parsed.total, 8);
    assert_eq!(parsed.accuracy, 1.0);
    assert!(fs::read_to_string(&roc).unwrap().starts_with("fpr,tpr\n"));
}

#[test]
fn bleu_perfect_match() {
    let dir = tempfile::tempdir().unwrap();
    let (refs, hyps) = (dir.path().join("refs.jsonl"), dir.path().join("hyps.jsonl"));
    fs::write(
        &refs,
        "{\"id\": 1, \"references\": [\"a man holding a gun\", \"person with a pistol\"]}\n\
         {\"id\": 2, \"references\": [\"a cat on a sofa\"]}\n",
    )
    .unwrap();
    fs::write(
        &hyps,
        "{\"id\": 2, \"caption\": \"A cat on a sofa.\"}\n{\"id\": 1, \"caption\": \"a man holding a gun\"}\n",
    )
    .unwrap();
    let (code, out, err) = postscreen(&["bleu", "--refs", p(&refs), "--hyps", p(&hyps)]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert_eq!(out, "BLEU-1 1.0000 BLEU-2 1.0000\n");

    fs::write(&hyps, "{\"id\": 3, \"caption\": \"x\"}\n").unwrap();
    let (code, _, err) = postscreen(&["bleu", "--refs", p(&refs), "--hyps", p(&hyps)]);
    assert_eq!(code, EXIT_DATA);
    assert!(err.contains("no references"), "{err}");
}

#[test]
fn usage_and_data_errors() {
    let (code, _, err) = postscreen(&["screen-everything"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("Usage"));
    let (code, _, _) = postscreen(&["bleu", "--refs", "x"]);
    assert_eq!(code, EXIT_USAGE);

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "label,text\n7,hello\n").unwrap();
    let (code, _, err) = postscreen(&["prep", "--data", p(&bad)]);
    assert_eq!(code, EXIT_DATA);
    assert!(err.contains(":2"), "{err}");

    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "version = 1\nmystery = true\n").unwrap();
    let (code, _, _) = postscreen(&["--config", p(&cfg), "prep", "--data", p(&bad)]);
    assert_eq!(code, EXIT_DATA);
}

fn solid(rgb: [u8; 3]) -> ImageBuffer {
    ImageBuffer::filled(6, 4, rgb)
}

fn write_image_fixture(dir: &Path) {
    let items = vec![
        common::item(
            solid([20, 20, 20]),
            "custom weapon with magazines",
            Category::MassShooting,
            false,
        ),
        common::item(
            solid([200, 40, 40]),
            "a person holding a rifle",
            Category::SchoolShooting,
            false,
        ),
        common::item(
            solid([40, 200, 40]),
            "a sunny garden with flowers",
            Category::NonThreatening,
            false,
        ),
        common::item(
            solid([240, 240, 250]),
            "friends at the beach",
            Category::NonThreatening,
            false,
        ),
    ];
    corpus::write_image_corpus(dir, &items).unwrap();
}

#[test]
fn captioning_classification_and_report_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let images = root.join("images");
    write_image_fixture(&images);

    let index = root.join("index.json");
    let (code, _, err) = postscreen(&[
        "caption",
        "index",
        "--corpus",
        p(&images),
        "--out",
        p(&index),
    ]);
    assert_eq!(code, EXIT_OK, "{err}");

    let (code, out, err) = postscreen(&[
        "caption",
        "eval",
        "--index",
        p(&index),
        "--corpus",
        p(&images),
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert_eq!(out, "BLEU-1 1.0000 BLEU-2 1.0000\n");

    let query = root.join("query.ppm");
    solid([25, 18, 22]).save_ppm(&query).unwrap();
    let (code, out, _) = postscreen(&["caption", "run", "--index", p(&index), p(&query)]);
    assert_eq!(code, EXIT_OK);
    assert!(
        out.ends_with("\tcustom weapon with magazines one\n"),
        "{out}"
    );

    let train = root.join("train.csv");
    fs::write(
        &train,
        "label,text\n1,custom weapon with magazines\n1,i will shoot them all\n1,rifle ready for school\n\
         0,lovely time at the beach\n0,flowers in my garden\n0,coffee with friends\n",
    )
    .unwrap();
    let model = root.join("model.json");
    let (code, _, err) = postscreen(&["train", "--data", p(&train), "--out", p(&model)]);
    assert_eq!(code, EXIT_OK, "{err}");

    let posts = root.join("posts.jsonl");
    fs::write(
        &posts,
        "{\"id\": \"p1\", \"text\": \"check out my new gear\", \"image\": \"query.ppm\", \"label\": 1}\n\
         {\"id\": \"p2\", \"text\": \"lovely time with friends\", \"label\": 0}\n\
         {\"id\": \"p3\", \"text\": \"i will shoot\", \"label\": 1}\n\
         {\"id\": \"p4\", \"text\": \"\", \"image\": \"images/non_threatening_00002.ppm\", \"label\": 0}\n",
    )
    .unwrap();
    // model and index come from the config file
    let cfg = root.join("run.toml");
    fs::write(
        &cfg,
        "version = 1\nmodel = \"model.json\"\nindex = \"index.json\"\n",
    )
    .unwrap();
    let verdicts = root.join("verdicts.jsonl");
    let (code, _, err) = postscreen(&[
        "--config",
        p(&cfg),
        "classify",
        "--posts",
        p(&posts),
        "--out",
        p(&verdicts),
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    let first = fs::read(&verdicts).unwrap();
    let parsed: Vec<Verdict> = std::str::from_utf8(&first)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let ids: Vec<&str> = parsed.iter().map(|v| v.id.as_str()).collect();
    assert_eq!(ids, ["p1", "p2", "p3", "p4"]);
    assert_eq!(
        parsed[0].generated_caption.as_deref(),
        Some("custom weapon with magazines one")
    );
    assert!(parsed[0]
        .fused_text
        .ends_with("custom weapon with magazines one"));
    assert!(parsed[1].generated_caption.is_none());
    let labels: Vec<Label> = parsed.iter().map(|v| v.label).collect();
    assert_eq!(
        labels,
        [
            Label::Concerning,
            Label::Benign,
            Label::Concerning,
            Label::Benign
        ]
    );

    let (code, _, _) = postscreen(&[
        "--config",
        p(&cfg),
        "classify",
        "--posts",
        p(&posts),
        "--out",
        p(&verdicts),
    ]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(fs::read(&verdicts).unwrap(), first);

    let (roc, report) = (root.join("roc.csv"), root.join("report.json"));
    let (code, out, err) = postscreen(&[
        "report",
        "--verdicts",
        p(&verdicts),
        "--roc-csv",
        p(&roc),
        "--out",
        p(&report),
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(out.contains("Accuracy"));
    let parsed: EvalReport = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(parsed.accuracy, 1.0);
    assert_eq!(parsed.roc.unwrap().auc, 1.0);
}

#[test]
fn classify_image_post_without_captioner_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    solid([1, 2, 3]).save_ppm(&root.join("x.ppm")).unwrap();
    fs::write(root.join("train.csv"), "label,text\n1,gun\n0,cat\n").unwrap();
    let model = root.join("m.json");
    assert_eq!(
        postscreen(&[
            "train",
            "--data",
            p(&root.join("train.csv")),
            "--out",
            p(&model)
        ])
        .0,
        EXIT_OK
    );
    fs::write(
        root.join("posts.jsonl"),
        "{\"id\": 1, \"text\": \"gun\", \"image\": \"x.ppm\"}\n",
    )
    .unwrap();
    let (code, _, err) = postscreen(&[
        "classify",
        "--model",
        p(&model),
        "--posts",
        p(&root.join("posts.jsonl")),
    ]);
    assert_eq!(code, EXIT_DATA);
    assert!(err.contains('1'), "{err}");
}

#[test]
fn augment_writes_merged_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let src = root.join("src");
    write_image_fixture(&src);
    let recipe = root.join("recipe.toml");
    fs::write(
        &recipe,
        "seed = 11\n\
         [[category]]\ncategory = \"mass_shooting\"\nops_per_image = 1\nops = [{ kind = \"flip_h\" }]\n\
         [[category]]\ncategory = \"school_shooting\"\nops_per_image = 2\n\
         ops = [{ kind = \"brightness\", delta = 30 }, { kind = \"rotate90\", quarter_turns = 1 }, { kind = \"contrast\", factor = 1.2 }]\n",
    )
    .unwrap();
    let out = root.join("out");
    let (code, _, err) = postscreen(&[
        "augment",
        "--corpus",
        p(&src),
        "--recipe",
        p(&recipe),
        "--out",
        p(&out),
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    let merged = corpus::load_image_corpus(&out).unwrap();
    assert_eq!(merged.len(), 6);
    let augmented: Vec<_> = merged.iter().filter(|i| i.augmented).collect();
    assert_eq!(augmented.len(), 2);
    // "weapon" is in the bundled word tables, "magazines" is not
    assert!(augmented
        .iter()
        .any(|i| i.category == Category::MassShooting
            && i.captions()[0] == "custom weapon with magazines one"));

    let out2 = root.join("out2");
    postscreen(&[
        "augment",
        "--corpus",
        p(&src),
        "--recipe",
        p(&recipe),
        "--out",
        p(&out2),
    ]);
    assert_eq!(
        fs::read(out.join(corpus::MANIFEST_FILE)).unwrap(),
        fs::read(out2.join(corpus::MANIFEST_FILE)).unwrap()
    );
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_postscreen");
    let status = |args: &[&str]| Command::new(bin).args(args).output().unwrap().status.code();
    assert_eq!(status(&["--help"]), Some(EXIT_OK));
    assert_eq!(status(&["--version"]), Some(EXIT_OK));
    assert_eq!(status(&["nope"]), Some(EXIT_USAGE));
    assert_eq!(
        status(&["prep", "--data", "/definitely/missing.csv"]),
        Some(EXIT_DATA)
    );
}
