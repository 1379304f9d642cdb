//! Chaos statistics, Monte Carlo estimators and empirical checks of the
//! moment and tail inequalities behind the uniform Hanson-Wright bound.

mod checks;
mod curves;
mod family;
mod forms;

pub use checks::*;
pub use curves::*;
pub use family::MatrixFamily;
pub use forms::*;
