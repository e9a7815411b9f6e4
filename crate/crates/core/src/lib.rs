//! Budgeted best-arm identification for combinatorial bandits with
//! subset-dependent semi-bandit feedback.
//!
//! A learner repeatedly pulls a *query set* of 2 to `k` arms out of `n` and
//! observes one value per member. Each arm's statistic within a set
//! converges to a limit at a rate bounded by an envelope `gamma`. The crate
//! provides:
//!
//! * the model vocabulary ([`QuerySet`], [`ObservationVector`],
//!   [`LimitProfile`], [`RateFunction`], [`Schedule`]),
//! * incremental statistics ([`stats`]),
//! * stochastic, preference, censored-race and deterministic worst-case
//!   environments ([`env`]),
//! * combinatorial successive elimination with the CSWS, CSR and CSH
//!   schedules, round robin and a single-arm halving baseline ([`algo`]),
//! * closed-form budgets and lower bounds ([`budget`]),
//! * ground-truth winners ([`oracle`]),
//! * seeded experiment grids with CSV output ([`harness`]) and the
//!   deterministic boundary suites ([`verify`]).
//!
//! Arms are numbered from 0. The library is generic over [`Scalar`], so the
//! same code runs on `f64` and on exact rationals ([`Exact`]).
//!
//! ```
//! use cse_core::{schedule_for, Variant};
//!
//! let s = schedule_for(Variant::Csws, 20, 4).unwrap();
//! assert_eq!(s.rounds, 4);
//! assert_eq!(s.partitions, vec![5, 2, 1, 1]);
//! assert_eq!(s.per_set_budgets(500), vec![25, 62, 125, 125]);
//! ```

pub mod algo;
pub mod budget;
pub mod env;
mod error;
pub mod harness;
mod limits;
mod observation;
pub mod oracle;
mod query;
mod rate;
mod scalar;
mod schedule;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
pub use limits::{LimitEntry, LimitProfile, LimitRule, LimitSource, LimitTable};
pub use observation::{ObservationKind, ObservationVector};
pub use query::{binomial, enumerate_query_sets, enumerate_query_sets_up_to, ArmId, QuerySet, QuerySetIter};
pub use rate::{rate_inverse, rate_inverse_with_horizon, RateFunction, DEFAULT_RATE_HORIZON};
pub use scalar::{cmp_scalar, Exact, Scalar};
pub use schedule::{ceil_log, csr_log_rounds, schedule_for, EliminationPolicy, Schedule, Variant};

/// Limit profile over `f64`.
pub type ProfileF64 = LimitProfile<f64>;

/// Limit profile over exact rationals.
pub type ProfileExact = LimitProfile<Exact>;
