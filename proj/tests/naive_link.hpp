#ifndef CAPWATT_TESTS_NAIVE_LINK_HPP
#define CAPWATT_TESTS_NAIVE_LINK_HPP

// Second, deliberately plain implementation of the amplifier-chain recurrence.
// Shares no code with capwatt/linksim.hpp beyond the parameter structs; used as
// the reference the library's propagate() is checked against.

#include <cmath>
#include <stdexcept>
#include <vector>

namespace naive {

struct Link {
  std::vector<double> alpha_db, gstar_db, freq_hz, gff_db;  // gff_db empty when absent
  double ase_bw_hz = 100e9;
  double nsp_max = 10.0;
  double symbol_rate_hz = 50e9;
  double tx_snr_db = 45.0;
  double span_loss_db = 16.5;
  double amp_output_mw = 0.0;
  int spans = 12;
  int amps = 11;
};

struct Result {
  std::vector<double> signal_w, ase_w_per_hz, snr;
};

inline double lin(double db) { return std::exp(db * std::log(10.0) / 10.0); }

// Output power for inversion x, in W, written out channel by channel.
inline double output_w(const Link& L, const std::vector<double>& s_in, const std::vector<double>& a_in, double x,
                       std::vector<double>* s_out, std::vector<double>* a_out) {
  const double h = 6.62607015e-34;
  double total = 0.0;
  for (size_t k = 0; k < s_in.size(); ++k) {
    double gdb = x * (L.alpha_db[k] + L.gstar_db[k]) - L.alpha_db[k];
    double g = lin(gdb);
    double s = s_in[k] * g;
    double a = a_in[k] * g;
    if (g > 1.0) {
      double nsp = (x * (L.alpha_db[k] + L.gstar_db[k])) / gdb;
      if (nsp < 1.0) nsp = 1.0;
      if (nsp > L.nsp_max) nsp = L.nsp_max;
      a += 2.0 * nsp * h * L.freq_hz[k] * (g - 1.0);
    }
    if (s_out) (*s_out)[k] = s;
    if (a_out) (*a_out)[k] = a;
    total += s + a * L.ase_bw_hz;
  }
  return total;
}

inline Result run(const Link& L, const std::vector<double>& tx_dbm) {
  const size_t n = tx_dbm.size();
  std::vector<double> s(n), a(n);
  for (size_t k = 0; k < n; ++k) {
    s[k] = lin(tx_dbm[k]) * 1e-3;
    a[k] = 2.0 * s[k] / (lin(L.tx_snr_db) * L.symbol_rate_hz);
  }
  const double loss = lin(-L.span_loss_db);
  const double target = L.amp_output_mw * 1e-3;
  for (int span = 1; span <= L.spans; ++span) {
    for (size_t k = 0; k < n; ++k) {
      s[k] *= loss;
      a[k] *= loss;
    }
    if (span > L.amps) continue;
    double lo = 1e-3, hi = 1.0;
    for (int it = 0; it < 400; ++it) {
      double mid = 0.5 * (lo + hi);
      if (output_w(L, s, a, mid, nullptr, nullptr) < target)
        lo = mid;
      else
        hi = mid;
    }
    std::vector<double> s2(n), a2(n);
    output_w(L, s, a, 0.5 * (lo + hi), &s2, &a2);
    s = s2;
    a = a2;
    if (!L.gff_db.empty())
      for (size_t k = 0; k < n; ++k) {
        s[k] *= lin(-L.gff_db[k]);
        a[k] *= lin(-L.gff_db[k]);
      }
  }
  Result r{s, a, std::vector<double>(n)};
  for (size_t k = 0; k < n; ++k) r.snr[k] = s[k] / (0.5 * a[k] * L.symbol_rate_hz);
  return r;
}

}  // namespace naive

#endif  // CAPWATT_TESTS_NAIVE_LINK_HPP
