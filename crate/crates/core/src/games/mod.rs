//! Built-in game families.

pub mod epidemic;
pub mod polynomial;
pub mod public_goods;
pub mod security;
pub mod spec;
pub mod welfare;

pub use epidemic::{EpidemicGame, EpidemicParams};
pub use polynomial::{Polynomial, PolynomialGame, Term};
pub use public_goods::{karate, make_public_goods, PublicGoodsGame, PublicGoodsParams};
pub use security::{make_security, SecurityGame, SecurityParams};
pub use spec::{builtin, DynGame, GameSpec, BUILTINS};
pub use welfare::{LeafPayoff, WelfareGame};
