#!/usr/bin/env python3
# Copyright 2026 The Epistoch Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""External backend shim: solve an MPS file with highspy.

Usage: highs_solve.py MODEL.mps SOLUTION.sol [--gap G] [--time-limit S]
"""

import argparse
import sys

import highspy


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("mps")
    ap.add_argument("solution")
    ap.add_argument("--gap", type=float, default=0.0)
    ap.add_argument("--time-limit", type=float, default=None)
    args = ap.parse_args()

    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("mip_rel_gap", args.gap)
    h.setOptionValue("threads", 1)
    h.setOptionValue("random_seed", 0)
    if args.time_limit is not None:
        h.setOptionValue("time_limit", args.time_limit)
    if h.readModel(args.mps) != highspy.HighsStatus.kOk:
        print(f"cannot read {args.mps}", file=sys.stderr)
        return 2
    h.run()
    h.writeSolution(args.solution, 0)
    return 0


if __name__ == "__main__":
    sys.exit(main())
