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

use crate::niu::packet::NiuId;
use crate::transaction::Address;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Region {
    pub base: Address,
    pub size: u64,
    pub target: NiuId,
}

impl Region {
    pub fn end(&self) -> u64 {
        u64::from(self.base) + self.size
    }

    fn contains(&self, address: Address) -> bool {
        let a = u64::from(address);
        a >= u64::from(self.base) && a < self.end()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decoded {
    Hit { target: NiuId, offset: u32 },
    Miss,
}

/// Non-overlapping `[base, base + size)` regions, each owned by one target.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AddressMap {
    regions: Vec<Region>,
}

impl AddressMap {
    /// Builds a map, rejecting overlapping or empty regions.
    pub fn new(mut regions: Vec<Region>) -> Result<Self, String> {
        regions.sort_by_key(|r| r.base);
        for r in &regions {
            if r.size == 0 {
                return Err(format!("region of {} is empty", r.target));
            }
            if r.end() > 1u64 << crate::transaction::ADDRESS_BITS {
                return Err(format!("region of {} exceeds the address space", r.target));
            }
        }
        for pair in regions.windows(2) {
            if pair[0].end() > u64::from(pair[1].base) {
                return Err(format!("regions of {} and {} overlap", pair[0].target, pair[1].target));
            }
        }
        Ok(AddressMap { regions })
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn region_of(&self, target: NiuId) -> Option<&Region> {
        self.regions.iter().find(|r| r.target == target)
    }

    pub fn decode(&self, address: Address) -> Decoded {
        address_decode(address, self)
    }

    /// Decodes a whole access; an access straddling a region edge misses.
    pub fn decode_range(&self, address: Address, len: u32) -> Decoded {
        match self.decode(address) {
            Decoded::Hit { target, offset } => {
                let region = self.region_of(target).expect("decoded target has a region");
                if u64::from(address) + u64::from(len) <= region.end() {
                    Decoded::Hit { target, offset }
                } else {
                    Decoded::Miss
                }
            }
            Decoded::Miss => Decoded::Miss,
        }
    }
}

pub fn address_decode(address: Address, map: &AddressMap) -> Decoded {
    // regions are sorted; the candidate is the last one starting at or below
    let idx = map.regions.partition_point(|r| r.base <= address);
    match idx.checked_sub(1).map(|i| &map.regions[i]) {
        Some(r) if r.contains(address) => Decoded::Hit { target: r.target, offset: address - r.base },
        _ => Decoded::Miss,
    }
}
