//! Deterministic synthetic dataset generator.
//!
//! Builds a catalog of products linked to creators, categories, brands, and
//! collections with skewed popularity, plus users whose interactions cluster
//! around preferred categories. Useful for demos and for end-to-end tests
//! that need a dataset with several path types, varied entity popularity,
//! and a predictive interaction signal.

use std::path::{Path as FsPath, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::tsv::write_atomic;

/// Sizes and seed of the generated dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixtureSpec {
    pub seed: u64,
    pub users: usize,
    pub products: usize,
    pub creators: usize,
    pub categories: usize,
    pub brands: usize,
    pub collections: usize,
    pub min_interactions: usize,
    pub max_interactions: usize,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        FixtureSpec {
            seed: 42,
            users: 240,
            products: 600,
            creators: 80,
            categories: 24,
            brands: 16,
            collections: 40,
            min_interactions: 10,
            max_interactions: 25,
        }
    }
}

/// Generated records, ready to serialize into the standard TSV formats.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub entities: Vec<(String, String)>,
    pub triples: Vec<(String, String, String)>,
    pub interactions: Vec<(String, String, i64)>,
    pub groups: Vec<(String, String)>,
}

/// Index skewed toward 0; higher `power` concentrates more mass at the head.
fn skewed_index(rng: &mut ChaCha8Rng, n: usize, power: f64) -> usize {
    let u: f64 = rng.random();
    ((u.powf(power) * n as f64) as usize).min(n - 1)
}

pub fn generate(spec: &FixtureSpec) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut entities = Vec::new();
    let mut triples = Vec::new();

    let users: Vec<String> = (0..spec.users).map(|i| format!("u{i:04}")).collect();
    let products: Vec<String> = (0..spec.products).map(|i| format!("p{i:04}")).collect();
    let creators: Vec<String> = (0..spec.creators).map(|i| format!("cr{i:03}")).collect();
    let categories: Vec<String> = (0..spec.categories).map(|i| format!("cat{i:02}")).collect();
    let brands: Vec<String> = (0..spec.brands).map(|i| format!("br{i:02}")).collect();
    let collections: Vec<String> = (0..spec.collections).map(|i| format!("col{i:02}")).collect();

    for user in &users {
        entities.push((user.clone(), "user".to_string()));
    }
    for product in &products {
        entities.push((product.clone(), "product".to_string()));
    }
    for (group, ty) in [
        (&creators, "creator"),
        (&categories, "category"),
        (&brands, "brand"),
        (&collections, "collection"),
    ] {
        for id in group.iter() {
            entities.push((id.clone(), ty.to_string()));
        }
    }

    // product attributes; categories remember their members for sampling
    let mut category_members: Vec<Vec<usize>> = vec![Vec::new(); spec.categories];
    for (pi, product) in products.iter().enumerate() {
        let creator = skewed_index(&mut rng, spec.creators, 2.0);
        triples.push((product.clone(), "created_by".to_string(), creators[creator].clone()));

        let primary = skewed_index(&mut rng, spec.categories, 1.5);
        let mut cats = vec![primary];
        for _ in 0..rng.random_range(0..=2usize) {
            let extra = rng.random_range(0..spec.categories);
            if !cats.contains(&extra) {
                cats.push(extra);
            }
        }
        for &ci in &cats {
            category_members[ci].push(pi);
            triples.push((product.clone(), "categorized_as".to_string(), categories[ci].clone()));
        }

        let brand = skewed_index(&mut rng, spec.brands, 2.0);
        triples.push((product.clone(), "branded_as".to_string(), brands[brand].clone()));

        for _ in 0..rng.random_range(0..=2usize) {
            let collection = rng.random_range(0..spec.collections);
            triples.push((
                product.clone(),
                "included_in".to_string(),
                collections[collection].clone(),
            ));
        }
    }
    triples.sort();
    triples.dedup();

    // users: preferred categories drive most interactions, so recent (test)
    // interactions stay predictable from the training history
    let mut interactions = Vec::new();
    let mut groups = Vec::new();
    for (ui, user) in users.iter().enumerate() {
        let mut preferred = Vec::new();
        for _ in 0..rng.random_range(2..=4usize) {
            let cat = skewed_index(&mut rng, spec.categories, 1.3);
            if !preferred.contains(&cat) && !category_members[cat].is_empty() {
                preferred.push(cat);
            }
        }
        if preferred.is_empty() {
            preferred.push(0);
        }

        let n = rng.random_range(spec.min_interactions..=spec.max_interactions);
        let mut timestamp = 1_500_000_000_i64 + (ui as i64) * 1_013;
        for _ in 0..n {
            let product = if rng.random_bool(0.8) {
                let cat = preferred[rng.random_range(0..preferred.len())];
                let members = &category_members[cat];
                members[skewed_index(&mut rng, members.len(), 1.5)]
            } else {
                rng.random_range(0..spec.products)
            };
            timestamp += rng.random_range(3_600..=1_209_600i64);
            interactions.push((user.clone(), products[product].clone(), timestamp));
        }

        let label = if rng.random_bool(0.48) { "f" } else { "m" };
        groups.push((user.clone(), label.to_string()));
    }

    Fixture {
        entities,
        triples,
        interactions,
        groups,
    }
}

/// Paths of the files written by [`write_to_dir`].
#[derive(Debug, Clone)]
pub struct FixtureFiles {
    pub entities: PathBuf,
    pub kg: PathBuf,
    pub interactions: PathBuf,
    pub groups: PathBuf,
    pub config: PathBuf,
}

/// Write the fixture into `dir` as `entities.tsv`, `kg.tsv`,
/// `interactions.tsv`, `users.tsv`, and a ready-to-run `config.txt`.
pub fn write_to_dir(fixture: &Fixture, dir: &FsPath) -> Result<FixtureFiles> {
    std::fs::create_dir_all(dir)?;
    let files = FixtureFiles {
        entities: dir.join("entities.tsv"),
        kg: dir.join("kg.tsv"),
        interactions: dir.join("interactions.tsv"),
        groups: dir.join("users.tsv"),
        config: dir.join("config.txt"),
    };

    let mut out = String::new();
    for (id, ty) in &fixture.entities {
        out.push_str(&format!("{id}\t{ty}\n"));
    }
    write_atomic(&files.entities, &out)?;

    out = String::new();
    for (h, r, t) in &fixture.triples {
        out.push_str(&format!("{h}\t{r}\t{t}\n"));
    }
    write_atomic(&files.kg, &out)?;

    out = String::new();
    for (u, p, ts) in &fixture.interactions {
        out.push_str(&format!("{u}\t{p}\t{ts}\n"));
    }
    write_atomic(&files.interactions, &out)?;

    out = String::new();
    for (u, label) in &fixture.groups {
        out.push_str(&format!("{u}\t{label}\n"));
    }
    write_atomic(&files.groups, &out)?;

    let cfg = crate::config::RunConfig {
        kg: files.kg.clone(),
        entities: files.entities.clone(),
        interactions: files.interactions.clone(),
        groups: Some(files.groups.clone()),
        out: dir.join("out"),
        ..crate::config::RunConfig::default()
    };
    write_atomic(&files.config, &cfg.to_config_file())?;

    Ok(files)
}
