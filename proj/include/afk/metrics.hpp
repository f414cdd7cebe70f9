// Copyright 2026 The AFK Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef AFK_METRICS_HPP_
#define AFK_METRICS_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "afk/error.hpp"
#include "afk/filterbank.hpp"
#include "afk/rir.hpp"

namespace afk {

/// dB values are clamped here instead of going to -inf on silent tails.
constexpr double kEdcFloorDb = -120.0;
/// DRR is reported within +-60 dB.
constexpr double kDrrClampDb = 60.0;

/// Normalized backward-integrated energy decay, in dB. values_db[0] == 0.
struct EnergyDecayCurve {
  std::vector<double> values_db;
  int sample_rate = 0;

  double time_at(std::size_t index) const {
    return static_cast<double>(index) / sample_rate;
  }
};

/// Per-band RT60 seconds; the retrieval key.
struct Rt60Fingerprint {
  std::vector<double> rt60_s;

  std::size_t size() const { return rt60_s.size(); }
};

/// Schroeder backward integration: values_db[n] = 10*log10(tail(n)/total).
/// The backward partial sums are non-decreasing, so the curve is
/// non-increasing by construction.
inline EnergyDecayCurve schroeder_edc(const ImpulseResponse& ir) {
  ir.check_valid();
  const std::size_t n = ir.samples.size();
  std::vector<double> tail(n);
  double acc = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    acc += ir.samples[i] * ir.samples[i];
    tail[i] = acc;
  }
  const double total = tail[0];
  if (!(total > 0.0)) throw ZeroEnergyError("impulse response has zero energy");

  EnergyDecayCurve edc;
  edc.sample_rate = ir.sample_rate;
  edc.values_db.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (tail[i] <= 0.0) {
      edc.values_db[i] = kEdcFloorDb;
    } else {
      edc.values_db[i] = std::max(kEdcFloorDb, 10.0 * std::log10(tail[i] / total));
    }
  }
  edc.values_db[0] = 0.0;
  return edc;
}

/// RT60 via T20: least-squares line through the -5..-25 dB segment of the
/// decay curve, extrapolated to 60 dB.
inline double rt60_single(const EnergyDecayCurve& edc) {
  if (edc.values_db.empty() || edc.sample_rate <= 0)
    throw InvalidInputError("invalid energy decay curve");

  std::size_t i5 = edc.values_db.size();
  std::size_t i25 = edc.values_db.size();
  for (std::size_t i = 0; i < edc.values_db.size(); ++i) {
    if (i5 == edc.values_db.size() && edc.values_db[i] <= -5.0) i5 = i;
    if (edc.values_db[i] <= -25.0) {
      i25 = i;
      break;
    }
  }
  if (i25 == edc.values_db.size())
    throw InsufficientDecayError("decay curve never reaches -25 dB");
  if (i25 <= i5 + 1)
    throw InsufficientDecayError("decay segment -5..-25 dB too short to fit");

  // Line fit y = a + b*t over samples [i5, i25].
  double sum_t = 0.0, sum_y = 0.0, sum_tt = 0.0, sum_ty = 0.0;
  const double fs = edc.sample_rate;
  const std::size_t count = i25 - i5 + 1;
  for (std::size_t i = i5; i <= i25; ++i) {
    const double t = static_cast<double>(i) / fs;
    const double y = edc.values_db[i];
    sum_t += t;
    sum_y += y;
    sum_tt += t * t;
    sum_ty += t * y;
  }
  const double denom = count * sum_tt - sum_t * sum_t;
  if (denom == 0.0) throw InsufficientDecayError("degenerate decay segment");
  const double slope = (count * sum_ty - sum_t * sum_y) / denom;
  if (!(slope < 0.0))
    throw InsufficientDecayError("decay segment has non-negative slope");
  return -60.0 / slope;
}

/// Per-band RT60 fingerprint. A band whose filtered decay is too short to fit
/// falls back to the broadband RT60, so fingerprints always have B entries.
inline Rt60Fingerprint multiband_rt60(const ImpulseResponse& ir, const BandSpec& bands) {
  ir.check_valid();
  if (!bands.fits(ir.sample_rate))
    throw BandOutOfRangeError("band spec exceeds Nyquist for fs=" +
                              std::to_string(ir.sample_rate));

  double broadband = -1.0;  // computed on first fallback
  Rt60Fingerprint fp;
  fp.rt60_s.reserve(bands.size());
  for (double center : bands.centers_hz) {
    try {
      fp.rt60_s.push_back(rt60_single(schroeder_edc(band_filter(ir, center))));
    } catch (const InsufficientDecayError&) {
      if (broadband < 0.0) broadband = rt60_single(schroeder_edc(ir));
      fp.rt60_s.push_back(broadband);
    } catch (const ZeroEnergyError&) {
      if (broadband < 0.0) broadband = rt60_single(schroeder_edc(ir));
      fp.rt60_s.push_back(broadband);
    }
  }
  return fp;
}

/// Direct-to-reverberant ratio: energy within +-2.5 ms of the |ir| peak vs
/// all remaining energy, clamped to +-60 dB. Zero late energy reports the
/// +60 dB clamp rather than an error.
inline double drr(const ImpulseResponse& ir) {
  ir.check_valid();
  std::size_t peak = 0;
  double peak_abs = -1.0;
  for (std::size_t i = 0; i < ir.samples.size(); ++i) {
    const double a = std::abs(ir.samples[i]);
    if (a > peak_abs) {
      peak_abs = a;
      peak = i;
    }
  }
  if (!(peak_abs > 0.0)) throw ZeroEnergyError("impulse response has zero energy");

  const long half = std::lround(0.0025 * ir.sample_rate);
  const std::size_t lo =
      peak >= static_cast<std::size_t>(half) ? peak - half : 0;
  const std::size_t hi =
      std::min(ir.samples.size() - 1, peak + static_cast<std::size_t>(half));

  double direct = 0.0, late = 0.0;
  for (std::size_t i = 0; i < ir.samples.size(); ++i) {
    const double e = ir.samples[i] * ir.samples[i];
    if (i >= lo && i <= hi)
      direct += e;
    else
      late += e;
  }
  if (late <= 0.0) return kDrrClampDb;
  if (direct <= 0.0) return -kDrrClampDb;
  const double value = 10.0 * std::log10(direct / late);
  return std::clamp(value, -kDrrClampDb, kDrrClampDb);
}

struct MetricErrors {
  double rt60_err_pct = 0.0;  // mean over bands of |pred-ref|/ref
  double edf_err_db = 0.0;    // mean |EDC_pred - EDC_ref| until ref hits -30 dB
  double drr_err_db = 0.0;
};

/// The slowest decay the T20 fit can resolve reaches -25 dB exactly at the
/// end of the window; anything flatter extrapolates past 60/25 durations.
constexpr double kUnmeasurableRt60Factor = 60.0 / 25.0;

/// Table-style evaluation of a predicted RIR against a reference.
///
/// The reference is ground truth and stays strict: a reference whose decay
/// cannot be fit raises. The prediction is model output, and a model that
/// emits silence or a non-decaying tail must score badly rather than kill
/// the evaluation, so prediction-side fit failures use pinned worst-case
/// proxies: RT60 of kUnmeasurableRt60Factor times the duration, a decay
/// curve flat at the floor, and a fully reverberant DRR clamp.
inline MetricErrors metric_errors(const ImpulseResponse& pred,
                                  const ImpulseResponse& ref,
                                  const BandSpec& bands) {
  pred.check_valid();
  ref.check_valid();
  if (pred.sample_rate != ref.sample_rate)
    throw RateMismatchError("sample rates differ: " + std::to_string(pred.sample_rate) +
                            " vs " + std::to_string(ref.sample_rate));

  MetricErrors out;

  const double pred_duration =
      static_cast<double>(pred.samples.size()) / pred.sample_rate;
  Rt60Fingerprint fp_pred;
  try {
    fp_pred = multiband_rt60(pred, bands);
  } catch (const InsufficientDecayError&) {
    fp_pred.rt60_s.assign(bands.size(), kUnmeasurableRt60Factor * pred_duration);
  } catch (const ZeroEnergyError&) {
    fp_pred.rt60_s.assign(bands.size(), kUnmeasurableRt60Factor * pred_duration);
  }
  const Rt60Fingerprint fp_ref = multiband_rt60(ref, bands);
  double rt_sum = 0.0;
  for (std::size_t b = 0; b < bands.size(); ++b) {
    rt_sum += std::abs(fp_pred.rt60_s[b] - fp_ref.rt60_s[b]) / fp_ref.rt60_s[b];
  }
  out.rt60_err_pct = rt_sum / bands.size();

  EnergyDecayCurve edc_pred;
  try {
    edc_pred = schroeder_edc(pred);
  } catch (const ZeroEnergyError&) {
    edc_pred.sample_rate = pred.sample_rate;
    edc_pred.values_db.assign(pred.samples.size(), kEdcFloorDb);
  }
  const EnergyDecayCurve edc_ref = schroeder_edc(ref);
  std::size_t limit = edc_ref.values_db.size();
  for (std::size_t i = 0; i < edc_ref.values_db.size(); ++i) {
    if (edc_ref.values_db[i] <= -30.0) {
      limit = i + 1;
      break;
    }
  }
  limit = std::min({limit, edc_pred.values_db.size(), edc_ref.values_db.size()});
  double edf_sum = 0.0;
  for (std::size_t i = 0; i < limit; ++i) {
    edf_sum += std::abs(edc_pred.values_db[i] - edc_ref.values_db[i]);
  }
  out.edf_err_db = edf_sum / static_cast<double>(limit);

  double drr_pred = -kDrrClampDb;
  try {
    drr_pred = drr(pred);
  } catch (const ZeroEnergyError&) {
  }
  out.drr_err_db = std::abs(drr_pred - drr(ref));
  return out;
}

}  // namespace afk

#endif  // AFK_METRICS_HPP_
