//! Atlas of the energy-Casimir image regions whose fibers consist of
//! periodic orbits.
//!
//! Twelve regions cover the case `beta != 0` and four the case `beta = 0`.
//! Every region is an inequality system in `(h, c)`; equalities use exact
//! floating comparison and strict inequalities are strict, so boundary
//! pairs fall through to [`RegionCase::OutsideSList`]. Comparisons against
//! the parabola `c = h^2 / beta^2` are evaluated in the cleared form
//! `beta^2 c` vs `h^2` so that every region uses the same comparator.
//!
//! The sigma labels are opaque report strings; program logic keys only on
//! the case variants. Note that region 1.c.i spells its lower bound as
//! `max(-2h - beta^2, 0) < c`, which already implies the `0 < c < beta^2`
//! bullet it sits under; the lower bound is kept verbatim.

use serde::{Deserialize, Serialize};

use super::{LevelPair, SystemParams};

/// One region of the atlas, named by branch (1 = beta nonzero, 2 = beta
/// zero), bullet letter and roman numeral, plus the catch-all for pairs
/// matching no listed region.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegionCase {
    NonzeroAi,
    NonzeroAii,
    NonzeroAiii,
    NonzeroAiv,
    NonzeroBi,
    NonzeroBii,
    NonzeroCi,
    NonzeroCii,
    NonzeroCiii,
    NonzeroDi,
    NonzeroDii,
    NonzeroE,
    ZeroAi,
    ZeroAii,
    ZeroB,
    ZeroC,
    OutsideSList,
}

impl RegionCase {
    /// The regions listed for `beta != 0`, in list order.
    pub const NONZERO_BETA: [RegionCase; 12] = [
        RegionCase::NonzeroAi,
        RegionCase::NonzeroAii,
        RegionCase::NonzeroAiii,
        RegionCase::NonzeroAiv,
        RegionCase::NonzeroBi,
        RegionCase::NonzeroBii,
        RegionCase::NonzeroCi,
        RegionCase::NonzeroCii,
        RegionCase::NonzeroCiii,
        RegionCase::NonzeroDi,
        RegionCase::NonzeroDii,
        RegionCase::NonzeroE,
    ];

    /// The regions listed for `beta = 0`, in list order.
    pub const ZERO_BETA: [RegionCase; 4] = [
        RegionCase::ZeroAi,
        RegionCase::ZeroAii,
        RegionCase::ZeroB,
        RegionCase::ZeroC,
    ];

    pub fn is_listed(self) -> bool {
        self != RegionCase::OutsideSList
    }

    /// Hierarchical case code, e.g. `1.a.i` or `2.c`.
    pub fn case_path(self) -> &'static str {
        match self {
            RegionCase::NonzeroAi => "1.a.i",
            RegionCase::NonzeroAii => "1.a.ii",
            RegionCase::NonzeroAiii => "1.a.iii",
            RegionCase::NonzeroAiv => "1.a.iv",
            RegionCase::NonzeroBi => "1.b.i",
            RegionCase::NonzeroBii => "1.b.ii",
            RegionCase::NonzeroCi => "1.c.i",
            RegionCase::NonzeroCii => "1.c.ii",
            RegionCase::NonzeroCiii => "1.c.iii",
            RegionCase::NonzeroDi => "1.d.i",
            RegionCase::NonzeroDii => "1.d.ii",
            RegionCase::NonzeroE => "1.e",
            RegionCase::ZeroAi => "2.a.i",
            RegionCase::ZeroAii => "2.a.ii",
            RegionCase::ZeroB => "2.b",
            RegionCase::ZeroC => "2.c",
            RegionCase::OutsideSList => "OUTSIDE_S_LIST",
        }
    }

    /// Decorated sigma label naming the equilibrium classes whose images
    /// bound the region.
    pub fn sigma_label(self) -> &'static str {
        match self {
            RegionCase::NonzeroAi => "Σ_{(3,β)↔(3,β)}^{(s,−)↔(s,+)}",
            RegionCase::NonzeroAii => "Σ_{(3,β)}^{(s,−)}",
            RegionCase::NonzeroAiii => "Σ_{(3,β)→(2,β)}^{(s,±)→(u,*)}",
            RegionCase::NonzeroAiv => "Σ_{(2,β)→}^{(u,*)→}",
            RegionCase::NonzeroBi => "Σ_{(1,β)→(2,β)}^{u→(u,0)}",
            RegionCase::NonzeroBii => "Σ_{(2,β)→}^{(u,0)→}",
            RegionCase::NonzeroCi => "Σ_{(1,β)→(3,β)}^{(s,−)→(u,−)}",
            RegionCase::NonzeroCii => "Σ_{(3,β)→(3,β)}^{(u,−)→(u,+)}",
            RegionCase::NonzeroCiii => "Σ_{(3,β)→}^{(u,+)→}",
            RegionCase::NonzeroDi => "Σ_{(1,β)→(3,β)}^{(s,0)→(u,0)}",
            RegionCase::NonzeroDii => "Σ_{(3,β)→}^{(u,0)→}",
            RegionCase::NonzeroE => "Σ_{(1,β)→}^{(s,+)→}",
            RegionCase::ZeroAi => "Σ_{(3,0)→(2,0)}^{(s,*)→u}",
            RegionCase::ZeroAii => "Σ_{(2,0)→}^{u→}",
            RegionCase::ZeroB => "Σ_{(1,0)→}^{(s,0)→}",
            RegionCase::ZeroC => "Σ_{(1,0)→}^{(s,*)→}",
            RegionCase::OutsideSList => "",
        }
    }

    /// Whether this region applies for the given parameter branch.
    pub fn applies_to(self, beta: f64) -> bool {
        match self {
            RegionCase::OutsideSList => true,
            RegionCase::ZeroAi | RegionCase::ZeroAii | RegionCase::ZeroB | RegionCase::ZeroC => {
                beta == 0.0
            }
            _ => beta != 0.0,
        }
    }

    /// Evaluates the region's defining inequality system.
    pub fn accepts(self, lp: LevelPair, p: SystemParams) -> bool {
        if !self.applies_to(p.beta) {
            return false;
        }
        let (h, c) = (lp.h, lp.c);
        let b2 = p.beta * p.beta;
        match self {
            RegionCase::NonzeroAi => c > b2 && b2 * c > h * h,
            RegionCase::NonzeroAii => c > b2 && b2 * c == h * h,
            RegionCase::NonzeroAiii => h > b2 && 2.0 * h - b2 < c && b2 * c < h * h,
            RegionCase::NonzeroAiv => b2 < c && c < 2.0 * h - b2,
            RegionCase::NonzeroBi => c == b2 && -b2 < h && h < b2,
            RegionCase::NonzeroBii => c == b2 && h > b2,
            RegionCase::NonzeroCi => {
                -b2 < h && h < 0.0 && (-2.0 * h - b2) < c && c > 0.0 && b2 * c < h * h
            }
            RegionCase::NonzeroCii => -b2 < h && h < b2 && b2 * c > h * h && c < b2,
            RegionCase::NonzeroCiii => h > 0.0 && 0.0 < c && c < b2 && b2 * c < h * h,
            RegionCase::NonzeroDi => c == 0.0 && -b2 / 2.0 < h && h < 0.0,
            RegionCase::NonzeroDii => c == 0.0 && h > 0.0,
            RegionCase::NonzeroE => -2.0 * h - b2 < c && c < 0.0,
            RegionCase::ZeroAi => h > 0.0 && c > 2.0 * h,
            RegionCase::ZeroAii => 0.0 < c && c < 2.0 * h,
            RegionCase::ZeroB => c == 0.0 && h > 0.0,
            RegionCase::ZeroC => -2.0 * h < c && c < 0.0,
            RegionCase::OutsideSList => false,
        }
    }
}

/// Every listed region whose inequality system holds at `(h, c)`.
/// The atlas is disjoint, so this has at most one element; the sweep
/// tests verify that by counting.
pub fn matching_regions(lp: LevelPair, p: SystemParams) -> Vec<RegionCase> {
    let listed: &[RegionCase] = if p.beta == 0.0 {
        &RegionCase::ZERO_BETA
    } else {
        &RegionCase::NONZERO_BETA
    };
    listed.iter().copied().filter(|r| r.accepts(lp, p)).collect()
}

/// The unique matching region, or [`RegionCase::OutsideSList`].
pub fn classify_level_pair(lp: LevelPair, p: SystemParams) -> RegionCase {
    let listed: &[RegionCase] = if p.beta == 0.0 {
        &RegionCase::ZERO_BETA
    } else {
        &RegionCase::NONZERO_BETA
    };
    listed
        .iter()
        .copied()
        .find(|r| r.accepts(lp, p))
        .unwrap_or(RegionCase::OutsideSList)
}
