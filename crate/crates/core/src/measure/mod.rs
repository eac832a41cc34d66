//! Empirical pairings, density estimates and weighted test dictionaries.

mod dictionary;
mod empirical;

pub use dictionary::{
    basis_build, basis_build_with_panels, default_panels, delta_norm, DictionaryDescription, Member, SeedFamily,
    TestDictionary, MAX_CONDITION, QUAD_ORDER,
};
pub use empirical::{
    dual_norm, field_dictionary, fluctuation, fluctuation_coords, kde, pair, pair_dictionary, silverman_bandwidth,
    write_coords_csv, KdeResult, SignedMeasureCoords,
};
