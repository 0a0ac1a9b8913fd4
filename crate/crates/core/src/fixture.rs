//! The five-user walk-through instance.
//!
//! Bids are (8, 6, 6, 7, 2). The six tasks and their holders were found by a
//! small integer search so that every marginal quoted in the walk-through
//! holds; `tests::walkthrough_quantities` re-verifies each of them.
//!
//! | task | value | users      |
//! |------|-------|------------|
//! | 0    | 8     | 2          |
//! | 1    | 10    | 1, 2       |
//! | 2    | 8     | 1, 3       |
//! | 3    | 9     | 1, 5       |
//! | 4    | 9     | 3, 4       |
//! | 5    | 6     | 1, 2, 3    |

use crate::model::Instance;

pub fn walkthrough() -> Instance {
    Instance::from_parts(
        [8, 10, 8, 9, 9, 6],
        [
            (vec![1, 2, 3, 5], 8),
            (vec![0, 1, 5], 6),
            (vec![2, 4, 5], 6),
            (vec![4], 7),
            (vec![3], 2),
        ],
    )
    .expect("walk-through fixture is valid")
}

/// One user with value 10 and bid 4.
pub fn single_user() -> Instance {
    Instance::from_parts([10], [(vec![0], 4)]).expect("valid")
}
