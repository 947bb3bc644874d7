use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use skillforge_core::learner::{
    coverage, eval_goal_nav, eval_manipulation, navigate_greedy, select_model, train_explorer, train_goal_nav, train_manipulation,
    training_arena, EpisodeRecord, Explorer, ForwardWithTurns, LearnerConfig, LearnerError, PolicyKind, PolicyTable, RandomWalk,
    TrainMode, TrainingCurve,
};
use skillforge_core::world::{chebyshev, generate_world, Biome, Dir8, WorldConfig};
use skillforge_core::{parse_skill_file, ParseMode, SkillDefinition};

const GRIDWORLD: &str = include_str!("../../../data/gridworld.skills");

fn skill(name: &str) -> SkillDefinition {
    parse_skill_file(GRIDWORLD, ParseMode::Strict).unwrap().into_iter().find(|d| d.name == name).unwrap()
}

fn nav_table() -> PolicyTable {
    train_goal_nav(&training_arena(1), &LearnerConfig::goal_nav(1)).unwrap().table
}

#[test]
fn navigator_reaches_distance_ten_goals() {
    let nav = nav_table();
    // evaluation on the four compass goals at distance 10
    let cfg = LearnerConfig { goal_directions: 4, goal_distance: 10, seed: 99, ..LearnerConfig::default() };
    let rate = eval_goal_nav(&nav, &training_arena(5), &cfg, 200, 50).unwrap();
    assert!(rate >= 0.9, "{rate}");
}

#[test]
fn greedy_navigation_is_near_shortest_for_every_offset() {
    let nav = nav_table();
    let mut w0 = generate_world(&WorldConfig::empty(64, 0)).unwrap();
    assert!(w0.teleport((32, 32)));
    for dx in -10..=10 {
        for dz in -10..=10 {
            for heading in Dir8::ALL {
                let mut w = w0.clone();
                w.heading = heading;
                let goal = (32 + dx, 32 + dz);
                let d = chebyshev((32, 32), goal) as u64;
                let took = navigate_greedy(&nav, &mut w, goal, 2 * d);
                assert!(took.is_some(), "offset ({dx},{dz}) heading {heading:?}");
            }
        }
    }
}

#[test]
fn explorer_beats_random_and_hand_coded_walks() {
    let nav = nav_table();
    let high = train_explorer(&training_arena(2), &nav, &LearnerConfig::explorer(2)).unwrap().table;
    let (mut ours, mut random, mut hand) = (0, 0, 0);
    for seed in 0..30 {
        let w = generate_world(&training_arena(1000 + seed)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ours += coverage(&mut w.clone(), &mut Explorer::new(&high, &nav, 10), 1000, &mut rng);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        random += coverage(&mut w.clone(), &mut RandomWalk, 1000, &mut rng);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        hand += coverage(&mut w.clone(), &mut ForwardWithTurns::default(), 1000, &mut rng);
    }
    assert!(ours >= 2 * random, "{ours} vs random {random}");
    assert!(ours >= hand, "{ours} vs hand-coded {hand}");
}

#[test]
fn explorer_rejects_a_non_navigation_table() {
    let wrong = PolicyTable::new(PolicyKind::Manipulation);
    let err = train_explorer(&training_arena(0), &wrong, &LearnerConfig::explorer(0)).unwrap_err();
    assert!(matches!(err, LearnerError::KindMismatch { .. }));
}

#[test]
fn one_hit_adjacent_tree_is_learned_quickly() {
    let mut world = WorldConfig::preset(Biome::Forest, 0);
    world.harvest_hits.insert("tree".into(), 1);
    let cfg = LearnerConfig { episodes: 500, spawn_radius: 1, ..LearnerConfig::manipulation(4) };
    let t = train_manipulation(&world, &skill("log"), TrainMode::SpawnNearby, None, &cfg).unwrap();
    let peak = t.curve.smoothed.iter().cloned().fold(0.0, f64::max);
    assert!(peak >= 0.95, "peak smoothed success {peak}");
    let greedy = eval_manipulation(&t.table, &world, &skill("log"), TrainMode::SpawnNearby, None, &cfg, 100).unwrap();
    assert!(greedy >= 0.95, "{greedy}");
}

#[test]
fn go_explore_needs_finding_tables_and_targets() {
    let world = WorldConfig::preset(Biome::Forest, 0);
    let cfg = LearnerConfig { episodes: 3, ..LearnerConfig::manipulation(0) };
    let log = skill("log");
    assert_eq!(
        train_manipulation(&world, &log, TrainMode::GoExplore, None, &cfg).unwrap_err(),
        LearnerError::MissingFindingPolicy
    );
    let nav = PolicyTable::new(PolicyKind::GoalNav);
    let high = PolicyTable::new(PolicyKind::ExplorerHigh);
    let mut barren = world.clone();
    barren.resource_densities.insert("tree".into(), 0.0);
    assert!(matches!(
        train_manipulation(&barren, &log, TrainMode::GoExplore, Some((&high, &nav)), &cfg),
        Err(LearnerError::NoTargetInWorld(k)) if k == "tree"
    ));
    assert!(matches!(
        train_manipulation(&world, &skill("planks"), TrainMode::SpawnNearby, None, &cfg),
        Err(LearnerError::NotTrainable(_))
    ));
}

#[test]
fn training_is_reproducible() {
    let cfg = LearnerConfig { episodes: 300, ..LearnerConfig::goal_nav(8) };
    assert_eq!(train_goal_nav(&training_arena(8), &cfg).unwrap(), train_goal_nav(&training_arena(8), &cfg).unwrap());
    let world = WorldConfig::preset(Biome::Plains, 3);
    let cfg = LearnerConfig { episodes: 200, ..LearnerConfig::manipulation(3) };
    let a = train_manipulation(&world, &skill("beef"), TrainMode::SpawnNearby, None, &cfg).unwrap();
    let b = train_manipulation(&world, &skill("beef"), TrainMode::SpawnNearby, None, &cfg).unwrap();
    assert_eq!(a, b);
}

fn curve(flags: &[bool], window: usize) -> TrainingCurve {
    let recs = flags.iter().map(|&success| EpisodeRecord { ret: 0.0, success, env_steps: 1 }).collect();
    TrainingCurve::from_records(recs, window)
}

fn checkpoints(n: usize) -> Vec<PolicyTable> {
    (0..n)
        .map(|v| PolicyTable { version: v as u64, ..PolicyTable::new(PolicyKind::Manipulation) })
        .collect()
}

proptest! {
    #[test]
    fn selected_checkpoint_has_the_best_smoothed_success(
        flags in prop::collection::vec(any::<bool>(), 1..80),
        window in 1usize..12,
        tail in 1usize..40,
    ) {
        let c = curve(&flags, window);
        let cks = checkpoints(flags.len());
        let pick = select_model(&c, &cks, window).unwrap().version as usize;
        let best = c.smoothed.iter().cloned().fold(f64::MIN, f64::max);
        prop_assert_eq!(c.smoothed[pick], best);
        prop_assert!(c.smoothed[..pick].iter().all(|&s| s < best));
        // a run of failures after the end cannot move the pick
        let mut longer = flags.clone();
        longer.extend(std::iter::repeat_n(false, tail));
        let c2 = curve(&longer, window);
        let cks2 = checkpoints(longer.len());
        prop_assert_eq!(select_model(&c2, &cks2, window).unwrap().version as usize, pick);
    }
}

#[test]
fn select_model_worked_example() {
    let c = curve(&[false, false, true, true, false], 2);
    assert_eq!(select_model(&c, &checkpoints(5), 2).unwrap().version, 3);
    let flat = curve(&[true; 6], 3);
    assert_eq!(select_model(&flat, &checkpoints(6), 3).unwrap().version, 0);
    assert_eq!(select_model(&curve(&[], 3), &checkpoints(2), 3).unwrap_err(), LearnerError::EmptyCurve);
}
