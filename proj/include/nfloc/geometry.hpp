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

#ifndef NFLOC_GEOMETRY_HPP
#define NFLOC_GEOMETRY_HPP

#include "nfloc/types.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

namespace nfloc
{
    // Axis-aligned plane for a uniform planar array. The first named axis is the
    // "x-index fastest" direction of the row-major antenna ordering.
    enum class Plane
    {
        xy,
        xz,
        yz
    };

    inline Plane plane_from_string(const std::string &s)
    {
        if (s == "xy")
            return Plane::xy;
        if (s == "xz")
            return Plane::xz;
        if (s == "yz")
            return Plane::yz;
        throw std::invalid_argument("unknown plane '" + s + "' (expected xy, xz or yz)");
    }

    // Positions of an n_x by n_y grid with the given spacing, centred on `center`.
    // Ordering is row-major with the first in-plane index running fastest.
    inline Positions build_upa(int n_x, int n_y, double spacing, const Vec3 &center, Plane plane = Plane::xy)
    {
        if (n_x < 1 || n_y < 1)
            throw std::invalid_argument("build_upa: element counts must be positive");
        if (!(spacing > 0.0) || !std::isfinite(spacing))
            throw std::invalid_argument("build_upa: spacing must be positive and finite");
        if (!all_finite(center))
            throw std::invalid_argument("build_upa: center must be finite");

        Positions out(3, static_cast<Eigen::Index>(n_x) * n_y);
        const double off_x = 0.5 * (n_x - 1);
        const double off_y = 0.5 * (n_y - 1);
        Eigen::Index col = 0;
        for (int iy = 0; iy < n_y; ++iy)
        {
            const double w = (iy - off_y) * spacing;
            for (int ix = 0; ix < n_x; ++ix, ++col)
            {
                const double u = (ix - off_x) * spacing;
                Vec3 p;
                switch (plane)
                {
                case Plane::xy:
                    p = Vec3(u, w, 0.0);
                    break;
                case Plane::xz:
                    p = Vec3(u, 0.0, w);
                    break;
                case Plane::yz:
                    p = Vec3(0.0, u, w);
                    break;
                }
                out.col(col) = p + center;
            }
        }
        return out;
    }

    namespace detail
    {
        // Throws if any two columns are identical. Sort-based, O(n log n).
        inline void require_distinct(const Positions &p, const char *what)
        {
            std::vector<Eigen::Index> idx(static_cast<std::size_t>(p.cols()));
            std::iota(idx.begin(), idx.end(), Eigen::Index{0});
            auto key = [&p](Eigen::Index i) { return std::array<double, 3>{p(0, i), p(1, i), p(2, i)}; };
            std::sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) { return key(a) < key(b); });
            for (std::size_t i = 1; i < idx.size(); ++i)
                if (key(idx[i - 1]) == key(idx[i]))
                    throw std::invalid_argument(std::string(what) + ": two antennas share the same position");
        }

        inline void require_finite(const Positions &p, const char *what)
        {
            if (!p.allFinite())
                throw std::invalid_argument(std::string(what) + ": non-finite antenna coordinate");
        }
    } // namespace detail

    // Transmit and receive antenna positions (metres). Immutable after construction.
    class ArrayGeometry
    {
    public:
        ArrayGeometry(Positions tx, Positions rx)
            : tx_(std::move(tx)), rx_(std::move(rx))
        {
            if (tx_.cols() == 0 || rx_.cols() == 0)
                throw std::invalid_argument("ArrayGeometry: Tx and Rx arrays must be non-empty");
            detail::require_finite(tx_, "ArrayGeometry (Tx)");
            detail::require_finite(rx_, "ArrayGeometry (Rx)");
            detail::require_distinct(tx_, "ArrayGeometry (Tx)");
            detail::require_distinct(rx_, "ArrayGeometry (Rx)");
        }

        static ArrayGeometry monostatic(const Positions &p) { return ArrayGeometry(p, p); }

        const Positions &tx() const noexcept { return tx_; }
        const Positions &rx() const noexcept { return rx_; }
        Eigen::Index n_tx() const noexcept { return tx_.cols(); }
        Eigen::Index n_rx() const noexcept { return rx_.cols(); }

        Vec3 tx_centroid() const { return tx_.rowwise().mean(); }
        Vec3 rx_centroid() const { return rx_.rowwise().mean(); }

        // Smallest distance from `p` to any Tx or Rx antenna.
        double min_distance_to(const Vec3 &p) const
        {
            const double dt = (tx_.colwise() - p).colwise().norm().minCoeff();
            const double dr = (rx_.colwise() - p).colwise().norm().minCoeff();
            return std::min(dt, dr);
        }

    private:
        Positions tx_;
        Positions rx_;
    };

    class CarrierSpec
    {
    public:
        explicit CarrierSpec(double carrier_hz) : carrier_hz_(carrier_hz)
        {
            if (!(carrier_hz > 0.0) || !std::isfinite(carrier_hz))
                throw std::invalid_argument("CarrierSpec: carrier frequency must be positive and finite");
        }

        double frequency() const noexcept { return carrier_hz_; }
        double wavelength() const noexcept { return speed_of_light / carrier_hz_; }
        double wavenumber() const noexcept { return 2.0 * pi / wavelength(); }

    private:
        double carrier_hz_;
    };

    struct Target
    {
        Vec3 position;
        cplx reflection{1.0, 0.0};
    };

    class TargetScene
    {
    public:
        TargetScene(std::vector<Target> targets, CarrierSpec carrier)
            : targets_(std::move(targets)), carrier_(carrier)
        {
            if (targets_.empty())
                throw std::invalid_argument("TargetScene: at least one target is required");
            for (const auto &t : targets_)
            {
                if (!all_finite(t.position))
                    throw std::invalid_argument("TargetScene: non-finite target position");
                if (!std::isfinite(t.reflection.real()) || !std::isfinite(t.reflection.imag()))
                    throw std::invalid_argument("TargetScene: non-finite reflection coefficient");
            }
        }

        const std::vector<Target> &targets() const noexcept { return targets_; }
        const CarrierSpec &carrier() const noexcept { return carrier_; }
        std::size_t size() const noexcept { return targets_.size(); }

        Positions positions() const
        {
            Positions p(3, static_cast<Eigen::Index>(targets_.size()));
            for (std::size_t k = 0; k < targets_.size(); ++k)
                p.col(static_cast<Eigen::Index>(k)) = targets_[k].position;
            return p;
        }

        CVector reflections() const
        {
            CVector b(static_cast<Eigen::Index>(targets_.size()));
            for (std::size_t k = 0; k < targets_.size(); ++k)
                b(static_cast<Eigen::Index>(k)) = targets_[k].reflection;
            return b;
        }

        TargetScene with_positions(const Positions &p) const
        {
            auto t = targets_;
            for (std::size_t k = 0; k < t.size(); ++k)
                t[k].position = p.col(static_cast<Eigen::Index>(k));
            return TargetScene(std::move(t), carrier_);
        }

        TargetScene with_reflections(const CVector &b) const
        {
            auto t = targets_;
            for (std::size_t k = 0; k < t.size(); ++k)
                t[k].reflection = b(static_cast<Eigen::Index>(k));
            return TargetScene(std::move(t), carrier_);
        }

    private:
        std::vector<Target> targets_;
        CarrierSpec carrier_;
    };

    // Every target must be strictly separated from every antenna.
    inline void validate_scene(const ArrayGeometry &geometry, const TargetScene &scene)
    {
        for (std::size_t k = 0; k < scene.size(); ++k)
            if (!(geometry.min_distance_to(scene.targets()[k].position) > 0.0))
                throw std::invalid_argument("target " + std::to_string(k + 1) + " coincides with an antenna position");
    }

} // namespace nfloc

#endif
