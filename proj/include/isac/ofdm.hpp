// SPDX-License-Identifier: Apache-2.0
//
// isac-sense: networked device-free sensing simulator
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

#pragma once

#include "isac/geometry.hpp"

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include <cmath>
#include <cstddef>
#include <random>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace isac {

using Eigen::MatrixXcd;
using Eigen::VectorXcd;

struct OfdmConfig
{
    std::size_t N = 1024;        // subcarriers
    std::size_t Q = 512;         // cyclic prefix length in samples
    std::size_t L = 512;         // resolvable taps
    double delta_f = 390625.0;   // subcarrier spacing in Hz, N * delta_f = 400 MHz
    double power = 1.0;          // transmit power p
    double noise_var = 2.56;     // sigma_z^2; 20 dB correlation SNR for a 0.5-amplitude path at p = 1, N = 1024
    double c0 = 2.99792458e8;    // m/s

    double bandwidth() const noexcept { return static_cast<double>(N) * delta_f; }

    /// Path-length resolution of one sample delay, c0 / (N * delta_f).
    double range_bin() const noexcept { return c0 / bandwidth(); }

    /// Longest path length that still maps to a tap index <= L.
    double max_path_length() const noexcept { return static_cast<double>(L) * range_bin(); }

    void validate() const
    {
        if (N == 0 || L == 0)
            throw std::invalid_argument("OfdmConfig: N and L must be positive");
        if (L > Q + 1 || Q > N)
            throw std::invalid_argument("OfdmConfig: require L <= Q + 1 and Q <= N");
        if (!(delta_f > 0.0) || !(c0 > 0.0))
            throw std::invalid_argument("OfdmConfig: delta_f and c0 must be positive");
        if (!(power > 0.0))
            throw std::invalid_argument("OfdmConfig: power must be positive");
        if (noise_var < 0.0)
            throw std::invalid_argument("OfdmConfig: noise_var must be non-negative");
    }
};

/// Noise variance giving `snr_db` of correlation-domain SNR, p * N * |gain|^2 / sigma^2, for a path of amplitude `gain`.
inline double noise_var_for_snr(const OfdmConfig &cfg, double gain, double snr_db)
{
    return cfg.power * static_cast<double>(cfg.N) * gain * gain / std::pow(10.0, snr_db / 10.0);
}

using FreqSymbols = VectorXcd;

/// QPSK pilot symbols, one length-N vector per BS.
inline std::vector<FreqSymbols> generate_symbols(const OfdmConfig &cfg, std::size_t num_bs, Rng &rng)
{
    if (num_bs == 0)
        throw std::invalid_argument("generate_symbols: need at least one BS");
    const double a = std::sqrt(0.5);
    std::uniform_int_distribution<int> bit(0, 1);
    std::vector<FreqSymbols> out(num_bs, FreqSymbols(static_cast<Eigen::Index>(cfg.N)));
    for (auto &s : out)
        for (Eigen::Index n = 0; n < s.size(); ++n)
        {
            const double re = bit(rng) ? a : -a;
            const double im = bit(rng) ? a : -a;
            s[n] = {re, im};
        }
    return out;
}

/// Time-domain taps h[u][m][l], l = 1..L, stored densely.
class ChannelTensor
{
  public:
    ChannelTensor() = default;
    ChannelTensor(std::size_t num_bs, std::size_t taps)
        : m_(num_bs), l_(taps), h_(num_bs * num_bs * taps, cplx{0.0, 0.0})
    {
    }

    std::size_t num_bs() const noexcept { return m_; }
    std::size_t taps() const noexcept { return l_; }

    /// Tap l (1-based) of the channel from transmitter u to receiver m.
    cplx &at(std::size_t u, std::size_t m, std::size_t l) { return h_.at(index(u, m, l)); }
    const cplx &at(std::size_t u, std::size_t m, std::size_t l) const { return h_.at(index(u, m, l)); }

    /// Stacked channel h_m = [h_{1,m}; ...; h_{M,m}] seen by receiver m.
    VectorXcd stacked(std::size_t m) const
    {
        VectorXcd out(static_cast<Eigen::Index>(m_ * l_));
        for (std::size_t u = 0; u < m_; ++u)
            for (std::size_t l = 1; l <= l_; ++l)
                out[static_cast<Eigen::Index>(u * l_ + l - 1)] = at(u, m, l);
        return out;
    }

    std::size_t nonzeros(std::size_t u, std::size_t m) const
    {
        std::size_t n = 0;
        for (std::size_t l = 1; l <= l_; ++l)
            n += at(u, m, l) != cplx{0.0, 0.0};
        return n;
    }

    ChannelTensor &operator+=(const ChannelTensor &other)
    {
        if (other.m_ != m_ || other.l_ != l_)
            throw std::invalid_argument("ChannelTensor: shape mismatch");
        for (std::size_t i = 0; i < h_.size(); ++i)
            h_[i] += other.h_[i];
        return *this;
    }

  private:
    std::size_t index(std::size_t u, std::size_t m, std::size_t l) const
    {
        if (u >= m_ || m >= m_ || l == 0 || l > l_)
            throw std::out_of_range("ChannelTensor: index out of range");
        return (u * m_ + m) * l_ + (l - 1);
    }

    std::size_t m_ = 0;
    std::size_t l_ = 0;
    std::vector<cplx> h_;
};

/// Tap index (1-based) of a path of the given length: floor(length / bin) + 1.
inline std::size_t tap_index(double path_length, const OfdmConfig &cfg)
{
    return static_cast<std::size_t>(std::floor(path_length / cfg.range_bin())) + 1;
}

/// Quantizes every path onto its tap; paths landing on the same (u, m, l) add up.
inline ChannelTensor build_channels(const PathSet &paths, std::size_t num_bs, const OfdmConfig &cfg)
{
    ChannelTensor h(num_bs, cfg.L);
    for (std::size_t i = 0; i < paths.paths.size(); ++i)
    {
        const auto &p = paths.paths[i];
        if (p.tx_bs >= num_bs || p.rx_bs >= num_bs)
            throw std::out_of_range("build_channels: path references a BS outside the scene");
        if (!(p.path_length > 0.0))
            throw std::invalid_argument("build_channels: path length must be positive");
        const std::size_t l = tap_index(p.path_length, cfg);
        if (l > cfg.L)
        {
            std::ostringstream msg;
            msg << "build_channels: path " << i << " (type " << to_string(p.kind) << ", BS " << p.tx_bs + 1
                << " -> BS " << p.rx_bs + 1 << ", length " << p.path_length << " m) exceeds the maximum delay of "
                << cfg.L << " taps (" << cfg.max_path_length() << " m)";
            throw std::out_of_range(msg.str());
        }
        h.at(p.tx_bs, p.rx_bs, l) += p.gain;
    }
    return h;
}

/// One OFDM symbol with cyclic prefix: entries [0, Q) are the CP, [Q, Q + N) the useful part
/// chi = sqrt(p) W^H s, where W is the unitary DFT.
inline VectorXcd modulate(const FreqSymbols &symbols, const OfdmConfig &cfg)
{
    const auto N = static_cast<Eigen::Index>(cfg.N);
    const auto Q = static_cast<Eigen::Index>(cfg.Q);
    if (symbols.size() != N)
        throw std::invalid_argument("modulate: symbol vector length must equal N");
    Eigen::FFT<double> fft;
    VectorXcd chi(N);
    fft.inv(chi, symbols); // includes the 1/N factor
    chi *= std::sqrt(cfg.power) * std::sqrt(static_cast<double>(cfg.N));
    VectorXcd frame(N + Q);
    frame.head(Q) = chi.tail(Q);
    frame.tail(N) = chi;
    return frame;
}

/// Received useful window at every BS.
///
/// Sample n = 1..N of receiver m is y_{m,n} = sum_u sum_l h_{u,m,l} xbar_{u,n-l} + z_{m,n}, where xbar_{u,j}
/// is the transmitted frame at time j relative to the start of the useful part (j < 0 is the CP).
/// With delay l the window therefore sees a circular shift by l - 1 samples.
inline std::vector<VectorXcd> simulate_reception(const ChannelTensor &channels, const std::vector<VectorXcd> &tx,
                                                 const OfdmConfig &cfg, Rng &rng)
{
    const std::size_t M = channels.num_bs();
    const auto N = static_cast<Eigen::Index>(cfg.N);
    const auto Q = static_cast<Eigen::Index>(cfg.Q);
    if (tx.size() != M)
        throw std::invalid_argument("simulate_reception: need one transmitted frame per BS");
    if (channels.taps() > cfg.Q + 1)
        throw std::invalid_argument("simulate_reception: channel longer than the cyclic prefix");
    for (const auto &x : tx)
        if (x.size() != N + Q)
            throw std::invalid_argument("simulate_reception: frame length must be N + Q");

    std::vector<VectorXcd> rx(M, VectorXcd::Zero(N));
    for (std::size_t m = 0; m < M; ++m)
    {
        for (std::size_t u = 0; u < M; ++u)
            for (std::size_t l = 1; l <= channels.taps(); ++l)
            {
                const cplx h = channels.at(u, m, l);
                if (h == cplx{0.0, 0.0})
                    continue;
                // y_n uses xbar_{n-l}; frame position of xbar_j is j + Q. For n = 1 that is Q + 1 - l.
                const Eigen::Index start = Q + 1 - static_cast<Eigen::Index>(l);
                rx[m] += h * tx[u].segment(start, N);
            }
        if (cfg.noise_var > 0.0)
        {
            std::normal_distribution<double> gauss(0.0, std::sqrt(cfg.noise_var / 2.0));
            for (Eigen::Index n = 0; n < N; ++n)
            {
                const double re = gauss(rng);
                const double im = gauss(rng);
                rx[m][n] += cplx{re, im};
            }
        }
    }
    return rx;
}

/// Frequency-domain observation ybar = W y. Accepts the useful window (length N) or a full frame
/// (length N + Q) whose leading Q samples are discarded as CP.
inline VectorXcd remove_cp_dft(const VectorXcd &received, const OfdmConfig &cfg)
{
    const auto N = static_cast<Eigen::Index>(cfg.N);
    const auto Q = static_cast<Eigen::Index>(cfg.Q);
    VectorXcd useful;
    if (received.size() == N)
        useful = received;
    else if (received.size() == N + Q)
        useful = received.tail(N);
    else
        throw std::invalid_argument("remove_cp_dft: expected a vector of length N or N + Q");
    Eigen::FFT<double> fft;
    VectorXcd out(N);
    fft.fwd(out, useful);
    return out / std::sqrt(static_cast<double>(cfg.N));
}

/// Sensing dictionary Gt = [diag(s_1) G, ..., diag(s_M) G] with G_{n,l} = exp(-j 2 pi (n-1)(l-1) / N).
///
/// Column (u-1) L + l belongs to transmitter u and tap l. The matrix is never stored; use
/// DictionaryOperator for products or dense() for small problems.
class SensingDictionary
{
  public:
    SensingDictionary(std::vector<FreqSymbols> symbols, std::size_t taps) : symbols_(std::move(symbols)), l_(taps)
    {
        if (symbols_.empty())
            throw std::invalid_argument("SensingDictionary: need at least one symbol vector");
        n_ = static_cast<std::size_t>(symbols_.front().size());
        for (const auto &s : symbols_)
            if (static_cast<std::size_t>(s.size()) != n_)
                throw std::invalid_argument("SensingDictionary: symbol vectors differ in length");
        if (l_ == 0 || l_ > n_)
            throw std::invalid_argument("SensingDictionary: require 1 <= L <= N");
    }

    std::size_t rows() const noexcept { return n_; }
    std::size_t cols() const noexcept { return symbols_.size() * l_; }
    std::size_t num_tx() const noexcept { return symbols_.size(); }
    std::size_t taps() const noexcept { return l_; }
    const FreqSymbols &symbols(std::size_t u) const { return symbols_.at(u); }

    /// Column j (0-based) of the dictionary.
    VectorXcd column(std::size_t j) const
    {
        if (j >= cols())
            throw std::out_of_range("SensingDictionary: column out of range");
        const std::size_t u = j / l_;
        const std::size_t l0 = j % l_; // l - 1
        VectorXcd c(static_cast<Eigen::Index>(n_));
        for (std::size_t n = 0; n < n_; ++n)
        {
            // reduce the exponent modulo N before scaling to keep the phase exact
            const double k = static_cast<double>((n * l0) % n_);
            const double phase = -2.0 * std::numbers::pi * k / static_cast<double>(n_);
            c[static_cast<Eigen::Index>(n)] = symbols_[u][static_cast<Eigen::Index>(n)] * std::polar(1.0, phase);
        }
        return c;
    }

    MatrixXcd dense() const
    {
        MatrixXcd d(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(cols()));
        for (std::size_t j = 0; j < cols(); ++j)
            d.col(static_cast<Eigen::Index>(j)) = column(j);
        return d;
    }

  private:
    std::vector<FreqSymbols> symbols_;
    std::size_t n_ = 0;
    std::size_t l_ = 0;
};

inline SensingDictionary build_dictionary(const std::vector<FreqSymbols> &symbols, const OfdmConfig &cfg)
{
    if (!symbols.empty() && static_cast<std::size_t>(symbols.front().size()) != cfg.N)
        throw std::invalid_argument("build_dictionary: symbol length differs from N");
    return SensingDictionary(symbols, cfg.L);
}

/// FFT-backed products with a SensingDictionary. Owns FFT plans, so use one instance per thread.
class DictionaryOperator
{
  public:
    explicit DictionaryOperator(const SensingDictionary &dict)
        : dict_(&dict), time_(static_cast<Eigen::Index>(dict.rows())), freq_(static_cast<Eigen::Index>(dict.rows()))
    {
        fft_.SetFlag(Eigen::FFT<double>::Unscaled);
    }

    Eigen::Index rows() const noexcept { return static_cast<Eigen::Index>(dict_->rows()); }
    Eigen::Index cols() const noexcept { return static_cast<Eigen::Index>(dict_->cols()); }

    /// out = Gt * h
    void apply(const VectorXcd &h, VectorXcd &out)
    {
        const auto N = rows();
        const auto L = static_cast<Eigen::Index>(dict_->taps());
        out.setZero(N);
        for (std::size_t u = 0; u < dict_->num_tx(); ++u)
        {
            const auto block = h.segment(static_cast<Eigen::Index>(u) * L, L);
            if (block.isZero(0.0))
                continue;
            time_.setZero();
            time_.head(L) = block;
            fft_.fwd(freq_, time_);
            out += dict_->symbols(u).cwiseProduct(freq_);
        }
    }

    /// out = Gt^H * r
    void adjoint(const VectorXcd &r, VectorXcd &out)
    {
        const auto L = static_cast<Eigen::Index>(dict_->taps());
        out.resize(cols());
        for (std::size_t u = 0; u < dict_->num_tx(); ++u)
        {
            freq_ = dict_->symbols(u).conjugate().cwiseProduct(r);
            fft_.inv(time_, freq_); // unscaled: sum_n x_n exp(+j 2 pi n l / N)
            out.segment(static_cast<Eigen::Index>(u) * L, L) = time_.head(L);
        }
    }

  private:
    const SensingDictionary *dict_;
    Eigen::FFT<double> fft_;
    VectorXcd time_;
    VectorXcd freq_;
};

/// Dense matrix adapter with the same interface as DictionaryOperator.
class DenseOperator
{
  public:
    explicit DenseOperator(MatrixXcd a) : a_(std::move(a)) {}

    Eigen::Index rows() const noexcept { return a_.rows(); }
    Eigen::Index cols() const noexcept { return a_.cols(); }
    void apply(const VectorXcd &h, VectorXcd &out) { out.noalias() = a_ * h; }
    void adjoint(const VectorXcd &r, VectorXcd &out) { out.noalias() = a_.adjoint() * r; }

  private:
    MatrixXcd a_;
};

} // namespace isac
