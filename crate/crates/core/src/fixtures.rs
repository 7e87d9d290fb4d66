//! Bundled recipe library and the instances built from it.

use crate::dsl::parse_recipe;
use crate::model::{Instance, Recipe};
use crate::Error;

/// `(recipe name, document)` for every bundled recipe.
pub const SOURCES: &[(&str, &str)] = &[
    ("Baked-Potato", include_str!("../fixtures/baked-potato.recipe")),
    ("Cheese-Sandwich", include_str!("../fixtures/cheese-sandwich.recipe")),
    ("Daikon-Radish", include_str!("../fixtures/daikon-radish.recipe")),
    ("Omelette", include_str!("../fixtures/omelette.recipe")),
    ("Quick-Noodles", include_str!("../fixtures/quick-noodles.recipe")),
    ("Smore-Bars", include_str!("../fixtures/smore-bars.recipe")),
    ("Tacos", include_str!("../fixtures/tacos.recipe")),
    ("Tea", include_str!("../fixtures/tea.recipe")),
    ("Toast", include_str!("../fixtures/toast.recipe")),
    ("Vada", include_str!("../fixtures/vada.recipe")),
];

/// Recipe pairs bundled as two-recipe instances.
pub const PAIRS: &[(&str, &str)] = &[
    ("Baked-Potato", "Cheese-Sandwich"),
    ("Tacos", "Smore-Bars"),
    ("Vada", "Daikon-Radish"),
    ("Tea", "Toast"),
    ("Omelette", "Tea"),
    ("Toast", "Quick-Noodles"),
];

pub fn source(name: &str) -> Option<&'static str> {
    SOURCES
        .iter()
        .find(|(n, _)| n.eq_ignore_ascii_case(name))
        .map(|(_, s)| *s)
}

pub fn recipe(name: &str) -> Result<Recipe, Error> {
    let text = source(name).ok_or_else(|| Error::UnknownFixture(name.to_string()))?;
    Ok(parse_recipe(text)?)
}

/// Every bundled recipe in name order.
pub fn library() -> Vec<Recipe> {
    SOURCES
        .iter()
        .map(|(_, text)| parse_recipe(text).expect("bundled recipe parses"))
        .collect()
}

pub fn instance(names: &[&str]) -> Result<Instance, Error> {
    let recipes = names.iter().map(|n| recipe(n)).collect::<Result<_, _>>()?;
    Ok(Instance::new(recipes)?)
}

/// Every single-recipe instance followed by the bundled pairs.
pub fn bundled_instances() -> Vec<Instance> {
    let mut out: Vec<Instance> = library()
        .into_iter()
        .map(|r| Instance::new(vec![r]).expect("bundled recipe is valid"))
        .collect();
    out.extend(
        PAIRS
            .iter()
            .map(|(a, b)| instance(&[a, b]).expect("bundled pair is valid")),
    );
    out
}

/// Looks up a bundled instance by label, e.g. `Vada+Daikon-Radish`.
pub fn bundled(label: &str) -> Option<Instance> {
    let names: Vec<&str> = label.split('+').map(str::trim).collect();
    instance(&names).ok()
}
