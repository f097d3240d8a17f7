//! CSV export of a run, one row per round and consumer.
//!
//! Columns, in order:
//!
//! | column      | meaning                                            |
//! |-------------|----------------------------------------------------|
//! | `iteration` | leader/follower round, 0-based; the final re-solve is the last |
//! | `ec_id`     | consumer id                                        |
//! | `e_n`       | offered energy (kWh)                               |
//! | `p_n`       | unit price the consumer played against (cents/kWh) |
//! | `xi_n`      | slack `E_n - 2 c_n e_n + p_n`                      |
//! | `utility`   | the consumer's utility                             |
//! | `cost`      | station cost for the whole round                   |

use std::io::Write;

use super::EmesResult;
use crate::error::Result;
use crate::gnep::slack_vector;
use crate::model::EcParams;

pub const TRACE_HEADER: [&str; 7] = ["iteration", "ec_id", "e_n", "p_n", "xi_n", "utility", "cost"];

pub fn write_trace<W: Write>(result: &EmesResult, params: &[EcParams], writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(TRACE_HEADER)?;
    for round in &result.rounds {
        for (n, ec) in params.iter().enumerate() {
            out.write_record([
                round.iteration.to_string(),
                ec.id.to_string(),
                round.energies[n].to_string(),
                round.prices[n].to_string(),
                round.slacks[n].to_string(),
                round.utilities[n].to_string(),
                round.cost.to_string(),
            ])?;
        }
    }
    let last = result.rounds.len();
    let slacks = slack_vector(&result.energies, params, &result.prices)?;
    for (n, ec) in params.iter().enumerate() {
        out.write_record([
            last.to_string(),
            ec.id.to_string(),
            result.energies[n].to_string(),
            result.prices[n].to_string(),
            slacks[n].to_string(),
            result.utilities[n].to_string(),
            result.total_cost.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
