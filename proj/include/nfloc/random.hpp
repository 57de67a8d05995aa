// SPDX-License-Identifier: Apache-2.0
//
// nfloc: near-field MIMO radar localization toolkit
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef NFLOC_RANDOM_HPP
#define NFLOC_RANDOM_HPP

#include "nfloc/types.hpp"

#include <cstdint>
#include <initializer_list>
#include <random>

namespace nfloc
{
    // Circularly-symmetric complex Gaussian source with unit variance.
    //
    // Engine: std::mt19937_64 (fully specified by the standard). Each complex
    // sample consumes two engine outputs u1, u2 and applies Box-Muller:
    //   re = sqrt(-ln u1) cos(2 pi u2), im = sqrt(-ln u1) sin(2 pi u2)
    // with u1 in (0, 1] and u2 in [0, 1) built from the top 53 bits. The
    // transform is spelled out here rather than using std::normal_distribution,
    // whose algorithm differs between standard libraries.
    class ComplexGaussian
    {
    public:
        explicit ComplexGaussian(std::uint64_t seed) : engine_(seed) {}

        cplx operator()()
        {
            constexpr double scale = 1.0 / 9007199254740992.0; // 2^-53
            const double u1 = static_cast<double>((engine_() >> 11) + 1) * scale;
            const double u2 = static_cast<double>(engine_() >> 11) * scale;
            const double r = std::sqrt(-std::log(u1));
            const double phi = 2.0 * pi * u2;
            return {r * std::cos(phi), r * std::sin(phi)};
        }

        // rows x cols matrix filled column by column.
        CMatrix matrix(Eigen::Index rows, Eigen::Index cols)
        {
            CMatrix out(rows, cols);
            for (Eigen::Index c = 0; c < cols; ++c)
                for (Eigen::Index r = 0; r < rows; ++r)
                    out(r, c) = (*this)();
            return out;
        }

    private:
        std::mt19937_64 engine_;
    };

    inline std::uint64_t splitmix64(std::uint64_t x)
    {
        x += 0x9E3779B97F4A7C15ull;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
        return x ^ (x >> 31);
    }

    // Seed for a sub-stream identified by a sequence of indices.
    inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path)
    {
        std::uint64_t s = splitmix64(base);
        for (auto p : path)
            s = splitmix64(s ^ splitmix64(p + 0x632BE59BD9B4E019ull));
        return s;
    }

} // namespace nfloc

#endif
