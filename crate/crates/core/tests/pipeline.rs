//! End-to-end library pipeline through the file formats.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tokensyn::geom::chain_descriptors;
use tokensyn::io::{
    load_codebook, load_synonym_dict, load_tokens, parse_reports_csv, parse_structure, reports_to_csv,
    save_codebook_binary, save_synonym_dict, save_tokens, write_structure, CodebookFormat, StructureFileOptions,
};
use tokensyn::metrics::{corpus_report, evaluate_ensembles};
use tokensyn::{
    build_synonym_dict, decode, encode, generate_ensemble, synonym_swap, synth, train_codebook, Chain, Ensemble,
    Source, SwapConfig,
};

fn corpus(n: usize, len: usize, seed: u64) -> Vec<Chain> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| synth::random_chain(len, &mut r)).collect()
}

#[test]
fn train_swap_decode_evaluate() {
    let train = corpus(30, 70, 1);
    let samples: Vec<Vec<f64>> =
        train.iter().flat_map(|c| chain_descriptors(c, 5).unwrap().into_iter().map(|d| d.values)).collect();
    let fit = train_codebook(&samples, 128, 60, 2).unwrap();

    // Through the binary format and back.
    let cb = load_codebook(&save_codebook_binary(&fit.codebook), CodebookFormat::Binary).unwrap();
    let dict = load_synonym_dict(&save_synonym_dict(&build_synonym_dict(&cb, 1.0).unwrap())).unwrap();
    assert_eq!(dict.codebook_id(), cb.id());

    let targets = corpus(3, 50, 3);
    let seqs: Vec<_> = targets.iter().map(|c| encode(c, &cb, 5).unwrap()).collect();
    let reloaded = load_tokens(&save_tokens(cb.id(), 5, &seqs).unwrap()).unwrap();
    assert_eq!(reloaded, seqs);
    let swapped = synonym_swap(&reloaded[0], &dict, 4, 1.0).unwrap();
    assert_eq!(decode(&swapped, &cb, 5).unwrap().residue_count(), 50);

    let mut reports = Vec::new();
    for (i, target) in targets.iter().enumerate() {
        let cfg = SwapConfig { seed: i as u64, swap_prob: 1.0, num_samples: 30 };
        let generated = generate_ensemble(target, &cb, &dict, &cfg, 5).unwrap();
        let pdb = write_structure(&generated).unwrap();
        let generated = parse_structure(&pdb, &StructureFileOptions::default()).unwrap();
        assert_eq!(generated.len(), 30);

        let mut r = ChaCha8Rng::seed_from_u64(100 + i as u64);
        let reference = Ensemble::new((0..30).map(|_| synth::jitter(target, 0.7, &mut r)).collect(), Source::Reference).unwrap();
        let mut report = evaluate_ensembles(&generated, &reference).unwrap();
        report.target = format!("t{i}");
        assert!(report.md_pca_w2.unwrap() >= 0.0);
        assert!(report.rmsf_generated.iter().all(|v| *v >= 0.0));
        reports.push(report);
    }
    let back = parse_reports_csv(&reports_to_csv(&reports, 2).unwrap()).unwrap();
    assert_eq!(back, reports);
    let summary = corpus_report(&back).unwrap();
    assert_eq!(summary.n_targets, 3);
    assert!(summary.global_rmsf_r.is_some());
}
