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

#ifndef NFLOC_IO_HPP
#define NFLOC_IO_HPP

#include "nfloc/types.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>
#include <string>
#include <vector>

// Data container layout (all integers and doubles little-endian):
//
//   offset  size  field
//   0       8     magic "NFLOCDAT"
//   8       4     u32 format version (1)
//   12      4     u32 dtype (1 = complex128, interleaved re/im doubles)
//   16      8     u64 M (receive antennas)
//   24      8     u64 N (transmit antennas)
//   32      8     u64 L (snapshots)
//   40      8     u64 K (true targets stored; 0 if none)
//   48            Y, M x L, column-major, 2 doubles per entry
//                 X, N x L, column-major, 2 doubles per entry
//                 truth, K records of 5 doubles: x, y, z, Re b, Im b
//
// An optional JSON sidecar "<file>.json" carries the generating config.

namespace nfloc
{
    inline constexpr char container_magic[8] = {'N', 'F', 'L', 'O', 'C', 'D', 'A', 'T'};
    inline constexpr std::uint32_t container_version = 1;
    inline constexpr std::uint32_t container_dtype_complex128 = 1;

    struct DataContainer
    {
        CMatrix y;
        CMatrix x;
        Positions truth_positions = Positions(3, 0);
        CVector truth_reflections;

        bool has_truth() const noexcept { return truth_positions.cols() > 0; }
    };

    namespace detail
    {
        inline void put_u32(std::string &out, std::uint32_t v)
        {
            for (int i = 0; i < 4; ++i)
                out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
        }

        inline void put_u64(std::string &out, std::uint64_t v)
        {
            for (int i = 0; i < 8; ++i)
                out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
        }

        inline void put_f64(std::string &out, double d) { put_u64(out, std::bit_cast<std::uint64_t>(d)); }

        inline void put_matrix(std::string &out, const CMatrix &m)
        {
            for (Eigen::Index c = 0; c < m.cols(); ++c)
                for (Eigen::Index r = 0; r < m.rows(); ++r)
                {
                    put_f64(out, m(r, c).real());
                    put_f64(out, m(r, c).imag());
                }
        }

        class ByteReader
        {
        public:
            explicit ByteReader(const std::string &b) : bytes_(b) {}

            std::uint64_t u(int width)
            {
                need(static_cast<std::size_t>(width));
                std::uint64_t v = 0;
                for (int i = 0; i < width; ++i)
                    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
                pos_ += static_cast<std::size_t>(width);
                return v;
            }

            double f64() { return std::bit_cast<double>(u(8)); }

            void need(std::size_t n) const
            {
                if (bytes_.size() - pos_ < n)
                    throw IoError("data container is truncated");
            }

            std::size_t remaining() const noexcept { return bytes_.size() - pos_; }
            std::size_t position() const noexcept { return pos_; }
            void skip(std::size_t n)
            {
                need(n);
                pos_ += n;
            }

        private:
            const std::string &bytes_;
            std::size_t pos_ = 0;
        };

        inline CMatrix get_matrix(ByteReader &in, Eigen::Index rows, Eigen::Index cols)
        {
            CMatrix m(rows, cols);
            for (Eigen::Index c = 0; c < cols; ++c)
                for (Eigen::Index r = 0; r < rows; ++r)
                {
                    const double re = in.f64();
                    m(r, c) = cplx(re, in.f64());
                }
            return m;
        }
    } // namespace detail

    inline std::string encode_container(const DataContainer &d)
    {
        if (d.x.cols() != d.y.cols())
            throw std::invalid_argument("encode_container: X and Y must have the same number of snapshots");
        if (d.truth_reflections.size() != d.truth_positions.cols())
            throw std::invalid_argument("encode_container: truth positions and reflections differ in count");
        std::string out(container_magic, 8);
        detail::put_u32(out, container_version);
        detail::put_u32(out, container_dtype_complex128);
        detail::put_u64(out, static_cast<std::uint64_t>(d.y.rows()));
        detail::put_u64(out, static_cast<std::uint64_t>(d.x.rows()));
        detail::put_u64(out, static_cast<std::uint64_t>(d.y.cols()));
        detail::put_u64(out, static_cast<std::uint64_t>(d.truth_positions.cols()));
        detail::put_matrix(out, d.y);
        detail::put_matrix(out, d.x);
        for (Eigen::Index k = 0; k < d.truth_positions.cols(); ++k)
        {
            for (int i = 0; i < 3; ++i)
                detail::put_f64(out, d.truth_positions(i, k));
            detail::put_f64(out, d.truth_reflections(k).real());
            detail::put_f64(out, d.truth_reflections(k).imag());
        }
        return out;
    }

    inline DataContainer decode_container(const std::string &bytes)
    {
        detail::ByteReader in(bytes);
        in.need(8);
        if (std::memcmp(bytes.data(), container_magic, 8) != 0)
            throw IoError("not an nfloc data container (bad magic)");
        in.skip(8);
        const auto version = static_cast<std::uint32_t>(in.u(4));
        if (version != container_version)
            throw IoError("unsupported data container version " + std::to_string(version));
        const auto dtype = static_cast<std::uint32_t>(in.u(4));
        if (dtype != container_dtype_complex128)
            throw IoError("unsupported data container dtype " + std::to_string(dtype));
        const std::uint64_t M = in.u(8), N = in.u(8), L = in.u(8), K = in.u(8);
        // 16 bytes per complex entry, 40 per truth record; reject sizes that cannot match the file.
        const long double expect = 16.0L * (static_cast<long double>(M) * L + static_cast<long double>(N) * L) +
                                   40.0L * static_cast<long double>(K);
        if (expect != static_cast<long double>(in.remaining()))
            throw IoError("data container size does not match its header");
        if (M == 0 || N == 0 || L == 0)
            throw IoError("data container has an empty dimension");
        DataContainer d;
        d.y = detail::get_matrix(in, static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(L));
        d.x = detail::get_matrix(in, static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(L));
        d.truth_positions.resize(3, static_cast<Eigen::Index>(K));
        d.truth_reflections.resize(static_cast<Eigen::Index>(K));
        for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(K); ++k)
        {
            for (int i = 0; i < 3; ++i)
                d.truth_positions(i, k) = in.f64();
            const double re = in.f64();
            d.truth_reflections(k) = cplx(re, in.f64());
        }
        return d;
    }

    inline std::string read_file_bytes(const std::string &path)
    {
        std::ifstream in(path, std::ios::binary);
        if (!in)
            throw IoError("cannot open '" + path + "'");
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        if (in.bad())
            throw IoError("error reading '" + path + "'");
        return bytes;
    }

    inline void write_file_bytes(const std::string &path, const std::string &bytes)
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out)
            throw IoError("cannot open '" + path + "' for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out)
            throw IoError("error writing '" + path + "'");
    }

    inline void write_container(const std::string &path, const DataContainer &d)
    {
        write_file_bytes(path, encode_container(d));
    }

    inline DataContainer read_container(const std::string &path) { return decode_container(read_file_bytes(path)); }

    // Shortest representation that parses back to the same double; always '.' as decimal point.
    inline std::string format_double(double v)
    {
        if (std::isnan(v))
            return "nan";
        if (std::isinf(v))
            return v > 0 ? "inf" : "-inf";
        std::array<char, 32> buf{};
        const auto r = std::to_chars(buf.data(), buf.data() + buf.size(), v);
        return std::string(buf.data(), r.ptr);
    }

} // namespace nfloc

#endif
