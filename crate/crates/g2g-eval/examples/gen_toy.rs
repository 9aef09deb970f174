//! Writes the toy corpora used by the bundled data files.
use g2g_eval::toygen::{round_trip_corpus, split_corpus_by, toy_translation_corpus};
use g2g_chem::molgraph::parse_smiles;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let what = args.get(1).map(|s| s.as_str()).unwrap_or("toy");
    match what {
        "toy" => {
            let corpus = toy_translation_corpus(42, 170);
            // Test molecules come from the source domain: ring-free chains.
            let (train, test) = split_corpus_by(&corpus, 7, 50, |s| {
                parse_smiles(s).map(|m| m.ring_count() == 0).unwrap_or(false)
            });
            std::fs::write("toy_train.smi", train.join("\n") + "\n").unwrap();
            std::fs::write("toy_test.smi", test.join("\n") + "\n").unwrap();
            eprintln!("train {} test {}", train.len(), test.len());
        }
        "round" => {
            let corpus = round_trip_corpus(42, 200);
            std::fs::write("corpus_200.smi", corpus.join("\n") + "\n").unwrap();
            eprintln!("round-trip corpus {}", corpus.len());
        }
        _ => panic!("unknown"),
    }
}
