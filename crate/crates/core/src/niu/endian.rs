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

use serde::{Deserialize, Serialize};

use crate::niu::NiuError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Endianness {
    #[default]
    Little,
    Big,
}

/// Byte-lane swap within each beat when the two sides disagree.
pub fn endianness_convert(
    data: &[u8],
    beat_size: usize,
    socket: Endianness,
    fabric: Endianness,
) -> Result<Vec<u8>, NiuError> {
    if beat_size == 0 || !data.len().is_multiple_of(beat_size) {
        return Err(NiuError::RaggedBeat { len: data.len(), beat_size });
    }
    if socket == fabric {
        return Ok(data.to_vec());
    }
    Ok(data.chunks_exact(beat_size).flat_map(|beat| beat.iter().rev().copied()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use Endianness::*;

    #[test]
    fn lane_reversal() {
        assert_eq!(endianness_convert(&[1, 2, 3, 4], 4, Little, Big).unwrap(), vec![4, 3, 2, 1]);
        assert_eq!(
            endianness_convert(&[1, 2, 3, 4, 5, 6, 7, 8], 4, Big, Little).unwrap(),
            vec![4, 3, 2, 1, 8, 7, 6, 5]
        );
    }

    #[test]
    fn same_endianness_is_identity() {
        let data = [9, 8, 7, 6, 5, 4];
        assert_eq!(endianness_convert(&data, 2, Little, Little).unwrap(), data);
    }

    #[test]
    fn ragged_beat() {
        assert!(matches!(
            endianness_convert(&[1, 2, 3], 2, Little, Big),
            Err(NiuError::RaggedBeat { len: 3, beat_size: 2 })
        ));
    }

    proptest! {
        #[test]
        fn conversion_is_an_involution(beats in prop::collection::vec(any::<u8>(), 0..64), shift in 0u32..4, big in any::<bool>()) {
            let beat = 1usize << shift;
            let data: Vec<u8> = beats.iter().copied().take(beats.len() / beat * beat).collect();
            let socket = if big { Big } else { Little };
            let once = endianness_convert(&data, beat, socket, Little).unwrap();
            prop_assert_eq!(endianness_convert(&once, beat, socket, Little).unwrap(), data);
        }
    }
}
