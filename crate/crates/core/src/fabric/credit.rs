// Copyright 2026 The nocsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

use crate::fabric::FabricError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CreditAction {
    CanSend,
    Consume,
    Return,
}

/// Sender-side count of free receiver buffer slots.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CreditCounter {
    credits: u32,
    depth: u32,
    min_seen: u32,
    max_seen: u32,
}

impl CreditCounter {
    pub fn new(depth: u32) -> Self {
        CreditCounter { credits: depth, depth, min_seen: depth, max_seen: depth }
    }

    pub fn credits(&self) -> u32 {
        self.credits
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// Lowest and highest counts ever held.
    pub fn observed(&self) -> (u32, u32) {
        (self.min_seen, self.max_seen)
    }

    pub fn can_send(&self) -> bool {
        self.credits > 0
    }
}

pub fn credit_flow(counter: &mut CreditCounter, action: CreditAction) -> Result<bool, FabricError> {
    match action {
        CreditAction::CanSend => return Ok(counter.can_send()),
        CreditAction::Consume => {
            if counter.credits == 0 {
                return Err(FabricError::CreditAccounting("consume at zero credits"));
            }
            counter.credits -= 1;
        }
        CreditAction::Return => {
            if counter.credits >= counter.depth {
                return Err(FabricError::CreditAccounting("return beyond buffer depth"));
            }
            counter.credits += 1;
        }
    }
    counter.min_seen = counter.min_seen.min(counter.credits);
    counter.max_seen = counter.max_seen.max(counter.credits);
    Ok(counter.can_send())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn counter_examples() {
        let mut c = CreditCounter::new(2);
        credit_flow(&mut c, CreditAction::Consume).unwrap();
        credit_flow(&mut c, CreditAction::Consume).unwrap();
        assert_eq!(credit_flow(&mut c, CreditAction::CanSend), Ok(false));
        credit_flow(&mut c, CreditAction::Return).unwrap();
        assert_eq!(credit_flow(&mut c, CreditAction::CanSend), Ok(true));
    }

    #[test]
    fn accounting_faults() {
        let mut c = CreditCounter::new(1);
        assert!(credit_flow(&mut c, CreditAction::Return).is_err());
        credit_flow(&mut c, CreditAction::Consume).unwrap();
        assert!(credit_flow(&mut c, CreditAction::Consume).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn random_schedule_stays_in_bounds(depth in 1u32..9, steps in prop::collection::vec(any::<bool>(), 10_000)) {
            let mut c = CreditCounter::new(depth);
            let mut model: i64 = i64::from(depth);
            for consume in steps {
                let action = if consume { CreditAction::Consume } else { CreditAction::Return };
                let legal = if consume { model > 0 } else { model < i64::from(depth) };
                let r = credit_flow(&mut c, action);
                prop_assert_eq!(r.is_ok(), legal);
                if legal {
                    model += if consume { -1 } else { 1 };
                }
                prop_assert_eq!(i64::from(c.credits()), model);
                prop_assert!(c.credits() <= depth);
            }
            let (lo, hi) = c.observed();
            prop_assert!(hi <= depth && lo <= hi);
        }
    }
}
