use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;
use tokensyn::io::{save_codebook_binary, save_codebook_csv, write_structure};
use tokensyn::tokenizer::lossless_codebook;
use tokensyn::{synth, Chain, Codebook, Ensemble, Point, Source};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tokensyn")).args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &TempDir, name: &str, bytes: &[u8]) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, bytes).unwrap();
    p
}

fn pdb(dir: &TempDir, name: &str, chains: Vec<Chain>) -> PathBuf {
    write(dir, name, &write_structure(&Ensemble::new(chains, Source::Reference).unwrap()).unwrap())
}

fn chain(len: usize, seed: u64) -> Chain {
    synth::random_chain(len, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn jittered(base: &Chain, n: usize, seed: u64) -> Vec<Chain> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| synth::jitter(base, 0.5, &mut rng)).collect()
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn train_codebook_writes_loadable_file_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let inputs: Vec<PathBuf> = (0..5).map(|i| pdb(&dir, &format!("c{i}.pdb"), vec![chain(40, i)])).collect();
    let mut outs = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("cb{k}.tkcb"));
        let mut args = vec!["--out", s(&out), "train-codebook", "--codes", "16", "--input"];
        args.extend(inputs.iter().map(|p| s(p)));
        let o = run(&args);
        assert!(o.status.success(), "{}", stderr(&o));
        outs.push(std::fs::read(&out).unwrap());
        let summary = read(&dir.path().join(format!("cb{k}.tkcb.summary.txt")));
        assert!(summary.contains("inertia.1="));
        assert!(summary.contains("cluster_size.15="));
    }
    assert_eq!(outs[0], outs[1]);
    let cb = tokensyn::io::load_codebook(&outs[0], tokensyn::CodebookFormat::Binary).unwrap();
    assert_eq!((cb.m(), cb.d()), (16, 11));
    let manifest = read(&dir.path().join("cb0.tkcb.manifest"));
    assert!(manifest.contains("subcommand=train-codebook\n"));
    assert!(manifest.contains("codes=16\n"));
    assert!(manifest.contains(&format!("input.sha256.{}=", s(&inputs[0]))));
}

#[test]
fn too_many_codes_exits_2_naming_both_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let input = pdb(&dir, "c.pdb", vec![chain(10, 1)]);
    let out = dir.path().join("cb.tkcb");
    let o = run(&["--out", s(&out), "train-codebook", "--codes", "50", "--input", s(&input)]);
    assert_eq!(o.status.code(), Some(2));
    let msg = stderr(&o);
    assert!(msg.contains("50") && msg.contains("10"), "{msg}");
}

#[test]
fn synonyms_and_stats() {
    let dir = tempfile::tempdir().unwrap();
    let basis = Codebook::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
    let cb = write(&dir, "basis.csv", &save_codebook_csv(&basis));
    let o = run(&["synonyms", "--codebook", s(&cb), "--tau", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout.clone()).unwrap();
    assert!(text.ends_with("token,synonyms\n0,0\n1,1\n2,2\n"), "{text}");
    assert!(stderr(&o).contains("subcommand=synonyms"));

    let plots = dir.path().join("plots");
    let o = run(&["stats", "--codebook", s(&cb), "--tau", "0", "--plots-dir", s(&plots)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout.clone()).unwrap();
    assert!(text.contains("synonym_fraction=0\n"), "{text}");
    assert!(text.contains("component_count=3\n"));
    assert_eq!(read(&plots.join("distances.csv")).lines().count(), 3);
    assert_eq!(read(&plots.join("projection.csv")).lines().count(), 5);

    let o = run(&["synonyms", "--codebook", s(&dir.path().join("missing.csv"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn encode_decode_encode_is_stable_on_lossless_codebook() {
    let dir = tempfile::tempdir().unwrap();
    let c = chain(50, 3);
    let cb = write(&dir, "cb.csv", &save_codebook_csv(&lossless_codebook(std::slice::from_ref(&c), 5).unwrap()));
    let input = pdb(&dir, "c.pdb", vec![c]);
    let t1 = dir.path().join("t1.txt");
    let decoded = dir.path().join("d.pdb");
    let t2 = dir.path().join("t2.txt");
    for args in [
        vec!["--out", s(&t1), "encode", "--codebook", s(&cb), "--input", s(&input)],
        vec!["--out", s(&decoded), "decode", "--codebook", s(&cb), "--tokens", s(&t1)],
        vec!["--out", s(&t2), "encode", "--codebook", s(&cb), "--input", s(&decoded)],
    ] {
        let o = run(&args);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(read(&t1), read(&t2));
    assert!(read(&t1).starts_with("# codebook: cb-"));
}

#[test]
fn decode_rejects_foreign_tokens_unless_told() {
    let dir = tempfile::tempdir().unwrap();
    let c = chain(30, 4);
    let cb = write(&dir, "cb.csv", &save_codebook_csv(&lossless_codebook(std::slice::from_ref(&c), 5).unwrap()));
    let tokens = write(&dir, "t.txt", b"# codebook: external window: 5\n0 1 2 3 4 5 6\n");
    let o = run(&["decode", "--codebook", s(&cb), "--tokens", s(&tokens)]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["decode", "--codebook", s(&cb), "--tokens", s(&tokens), "--ignore-codebook-id"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let bad = write(&dir, "bad.txt", b"# codebook: external window: 5\n0 1 x 3\n");
    let o = run(&["decode", "--codebook", s(&cb), "--tokens", s(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2, column 5"), "{}", stderr(&o));
}

#[test]
fn ensemble_with_zero_tau_repeats_one_structure() {
    let dir = tempfile::tempdir().unwrap();
    let c = chain(40, 5);
    let cb = write(&dir, "cb.tkcb", &save_codebook_binary(&lossless_codebook(std::slice::from_ref(&c), 5).unwrap()));
    let input = pdb(&dir, "c.pdb", vec![c]);
    let o = run(&["ensemble", "--codebook", s(&cb), "--input", s(&input), "--tau", "0", "--num-samples", "7"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout.clone()).unwrap();
    let blocks: Vec<&str> = text.split("ENDMDL\n").filter(|b| b.contains("ATOM")).collect();
    assert_eq!(blocks.len(), 7);
    let atoms = |b: &str| b.lines().filter(|l| l.starts_with("ATOM")).map(str::to_string).collect::<Vec<_>>();
    assert!(blocks.iter().all(|b| atoms(b) == atoms(blocks[0])));
}

#[test]
fn perturb_keeps_tokens_inside_synonym_sets() {
    let dir = tempfile::tempdir().unwrap();
    let tokens = write(&dir, "t.txt", b"# codebook: toy window: 5\n0 1 2 0 1 2\n");
    let dict = write(&dir, "d.csv", b"# tau: 1\n# codebook: toy\ntoken,synonyms\n0,0 1\n1,0 1\n2,2\n");
    let o = run(&["--seed", "9", "perturb", "--tokens", s(&tokens), "--dict", s(&dict), "--num-samples", "20"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout.clone()).unwrap();
    let lines: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(lines.len(), 20);
    for l in lines {
        let t: Vec<u32> = l.split(' ').map(|x| x.parse().unwrap()).collect();
        assert!(t[0] <= 1 && t[1] <= 1 && t[2] == 2 && t[5] == 2);
    }
}

#[test]
fn evaluate_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let base = chain(30, 6);
    let a = pdb(&dir, "a.pdb", jittered(&base, 8, 1));
    let b = pdb(&dir, "b.pdb", jittered(&base, 8, 2));

    let same = dir.path().join("same.csv");
    let o = run(&["--out", s(&same), "evaluate", "--generated", s(&a), "--reference", s(&a)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let reports = tokensyn::io::parse_reports_csv(&std::fs::read(&same).unwrap()).unwrap();
    assert!((reports[0].per_target_rmsf_r.unwrap() - 1.0).abs() < 1e-9);
    assert!(reports[0].md_pca_w2.unwrap() < 1e-6);
    assert_eq!(reports[0].target, "a");

    let corpus = dir.path().join("corpus.csv");
    let o = run(&["--out", s(&corpus), "report", "--inputs", s(&same)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = read(&corpus);
    assert!(text.contains("pairwise_rmsd_r,undefined\n") && text.contains("global_rmsf_r,undefined\n"), "{text}");
    assert!(read(&dir.path().join("corpus.csv.rmsf.csv")).starts_with("target,residue_id,rmsf_generated,rmsf_reference\na,1,"));

    let o = run(&["evaluate", "--generated", s(&a), "--reference", s(&b), "--format", "jsonl"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let json = String::from_utf8(o.stdout).unwrap();
    assert_eq!(json.lines().count(), 1);
    assert!(json.contains("\"target\":\"b\"") && json.contains("\"md_pca_w2\":"), "{json}");
}

#[test]
fn report_medians_over_three_targets() {
    let dir = tempfile::tempdir().unwrap();
    let header = "target,per_target_rmsf_r,mean_pairwise_rmsd_generated,mean_pairwise_rmsd_reference,md_pca_w2,joint_pca_w2,residue_ids,rmsf_generated,rmsf_reference\n";
    let rows = [("t1", 0.9, 3.0), ("t2", 0.2, 1.0), ("t3", 0.5, 2.0)];
    let paths: Vec<PathBuf> = rows
        .iter()
        .map(|(t, r, w)| write(&dir, &format!("{t}.csv"), format!("{header}{t},{r},1.5,{w},{w},{},1 2,0.5 1,0.6 {r}\n", w * 2.0).as_bytes()))
        .collect();
    let mut args = vec!["report", "--inputs"];
    args.extend(paths.iter().map(|p| s(p)));
    let o = run(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout.clone()).unwrap();
    assert!(text.contains("n_targets,3\n"));
    assert!(text.contains("median_per_target_rmsf_r,0.5\n"), "{text}");
    assert!(text.contains("median_md_pca_w2,2\n"));
    assert!(text.contains("median_joint_pca_w2,4\n"));
    // Generated pairwise RMSDs are constant across targets.
    assert!(text.contains("pairwise_rmsd_r,undefined\n"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let base = chain(30, 7);
    let a = pdb(&dir, "a.pdb", jittered(&base, 5, 1));
    let short = pdb(&dir, "short.pdb", jittered(&chain(20, 8), 5, 2));
    let o = run(&["evaluate", "--generated", s(&a), "--reference", s(&short)]);
    assert_eq!(o.status.code(), Some(2));

    let line: Vec<Chain> = (0..3)
        .map(|k| Chain::new("l", (0..25).map(|i| Point::new(3.8 * i as f64 + k as f64 * 0.1, 0.0, 0.0)).collect()).unwrap())
        .collect();
    let collinear = pdb(&dir, "line.pdb", line);
    let o = run(&["evaluate", "--generated", s(&collinear), "--reference", s(&collinear)]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));

    let broken = write(&dir, "broken.pdb", b"HEADER\nATOM      1  CA  ALA A   1       1.000   abc     0.000\n");
    let o = run(&["evaluate", "--generated", s(&broken), "--reference", s(&a)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"));

    let o = run(&["ensemble", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn validate_reports_each_input_and_the_mean() {
    let dir = tempfile::tempdir().unwrap();
    let chains: Vec<Chain> = (0..3).map(|i| chain(40, 20 + i)).collect();
    let cb = write(&dir, "cb.csv", &save_codebook_csv(&lossless_codebook(&chains, 5).unwrap()));
    let inputs: Vec<PathBuf> = chains.into_iter().enumerate().map(|(i, c)| pdb(&dir, &format!("p{i}.pdb"), vec![c])).collect();
    let mut args = vec!["validate", "--codebook", s(&cb), "--tau", "0", "--input"];
    args.extend(inputs.iter().map(|p| s(p)));
    let o = run(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout.clone()).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("p0,1,"));
    assert!(lines[4].starts_with("mean,1,"));
}
