//! Free-group sphere and Cesàro averages.
//!
//! Sphere averages `s_n(x) = (1/#S_n) Σ_{|w|=n} σ_w(x)` are computed two ways: by
//! enumerating reduced words ([`sphere_average_brute`]) and through the Markov operator
//! `P(b)_i = P_i(Σ_j p(ij) b_j)` on `B = A^{|I|}`, whose powers satisfy
//! `s_n(x) = Σ_i p(i) Pⁿ(x̃)_i` ([`BufetovOperator::sphere_average_fast`]).

mod action;
mod bufetov;
mod system;

pub use action::{sphere_average_brute, word_average_brute, word_components_brute, FreeAction};
pub use bufetov::BufetovOperator;
pub use system::{enumerate_sphere, TransitionSystem, WordSpace, DEFAULT_WORD_CAP};
