use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::{SceneCorpus, SplitLabel};

/// Seeded partition at game granularity: `n_test_games` whole games go to
/// the test corpus, the rest to training.
pub fn split_train_test(corpus: &SceneCorpus, n_test_games: usize, seed: u64) -> Result<(SceneCorpus, SceneCorpus)> {
    let mut games = corpus.game_ids.clone();
    games.sort();
    games.dedup();
    if n_test_games > 0 && n_test_games >= games.len() {
        return Err(Error::config(format!(
            "cannot hold out {n_test_games} of {} games",
            games.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    games.shuffle(&mut rng);
    let test_games: std::collections::HashSet<&String> = games[..n_test_games].iter().collect();

    let (test, train): (Vec<_>, Vec<_>) = corpus
        .records
        .iter()
        .cloned()
        .partition(|r| test_games.contains(&r.game_id));
    let keep = |label: SplitLabel, want_test: bool, records| SceneCorpus {
        split: label,
        game_ids: corpus
            .game_ids
            .iter()
            .filter(|g| test_games.contains(g) == want_test)
            .cloned()
            .collect(),
        records,
    };
    Ok((keep(SplitLabel::Train, false, train), keep(SplitLabel::Test, true, test)))
}
