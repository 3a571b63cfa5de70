#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "seqformer/data.hpp"

namespace seqformer {

namespace {

// Generator constants. Frozen: tests measure event fractions on the output.
constexpr double kBaselineMean = 130.0;
constexpr double kCircadianAmplitude = 25.0;
constexpr double kNoiseStddev = 5.0;
constexpr double kMealMin = 60.0;
constexpr double kMealMax = 120.0;
constexpr double kMealRise = 15.0;   // minutes
constexpr double kMealHalfLife = 90.0;  // minutes
const double kMealDecay = kMealHalfLife / std::log(2.0);
constexpr double kInsulinPeak = 120.0;
constexpr double kDipProbability = 0.9;  // per day
constexpr double kSecondDipProbability = 0.8;
constexpr double kDipMin = 70.0;
constexpr double kDipMax = 110.0;
constexpr double kDipPeak = 45.0;
constexpr double kGapStartProbability = 0.002;
constexpr double kCarbRatio = 10.0;  // grams per unit

struct Excursion {
  double start = 0.0;  // minutes since series start
  double amplitude = 0.0;
  double rise = 0.0;
  double decay = 0.0;
};

// Rise-then-decay bump normalized to a peak of 1.
double bump(double dt, double rise, double decay) {
  if (dt <= 0.0) return 0.0;
  const double peak_t = rise * std::log1p(decay / rise);
  const double peak = (1.0 - std::exp(-peak_t / rise)) * std::exp(-peak_t / decay);
  return (1.0 - std::exp(-dt / rise)) * std::exp(-dt / decay) / peak;
}

// Gamma-like curve peaking at `peak` minutes with value 1.
double gamma_bump(double dt, double peak) {
  if (dt <= 0.0) return 0.0;
  const double x = dt / peak;
  return x * std::exp(1.0 - x);
}

}  // namespace

std::vector<SubjectRecords> synth_generate(const SynthOptions& options) {
  std::vector<SubjectRecords> subjects;
  Rng rng(options.seed);
  // 2020-01-01T00:00
  const std::int64_t epoch_minute = 18262LL * 1440;
  const int steps_per_day = 1440 / kGridMinutes;

  for (int s = 0; s < options.subjects; ++s) {
    SubjectRecords subject;
    subject.id = "subject_" + std::to_string(s + 1);
    const double baseline = kBaselineMean + rng.uniform(-8.0, 8.0);
    const double phase = rng.uniform(0.0, 1440.0);
    const double basal_rate = rng.uniform(0.7, 1.2);
    const double sensitivity = rng.uniform(0.1, 0.2);  // insulin dip relative to the meal

    std::vector<Excursion> meals;
    std::vector<Excursion> dips;
    std::vector<std::pair<double, double>> meal_events;  // (minute, carbs)
    for (int d = 0; d < options.days; ++d) {
      const double day0 = d * 1440.0;
      std::vector<double> times = {7.5 * 60, 12.5 * 60, 19.0 * 60};
      if (rng.bernoulli(0.5)) times.push_back(16.0 * 60);
      for (double t : times) {
        const double start = day0 + t + rng.uniform(-45.0, 45.0);
        const double amp = rng.uniform(kMealMin, kMealMax);
        meals.push_back({start, amp, kMealRise, kMealDecay});
        // Bolus-driven dip trailing the meal.
        dips.push_back({start + 90.0, amp * sensitivity, kInsulinPeak, 0.0});
        meal_events.emplace_back(start, std::round(amp / 2.5));
      }
      for (double p : {kDipProbability, kSecondDipProbability}) {
        if (!rng.bernoulli(p)) continue;
        const double start = day0 + rng.uniform(0.0, 1440.0);
        dips.push_back({start, rng.uniform(kDipMin, kDipMax), kDipPeak, 0.0});
      }
    }

    const int steps = options.days * steps_per_day;
    int gap_left = 0;
    std::size_t next_meal = 0;
    std::sort(meal_events.begin(), meal_events.end());
    subject.records.reserve(static_cast<std::size_t>(steps));
    for (int i = 0; i < steps; ++i) {
      const double t = static_cast<double>(i * kGridMinutes);
      double g = baseline + kCircadianAmplitude *
                                std::sin(2.0 * std::numbers::pi * (t - phase) / 1440.0);
      for (const Excursion& m : meals) g += m.amplitude * bump(t - m.start, m.rise, m.decay);
      for (const Excursion& d : dips) g -= d.amplitude * gamma_bump(t - d.start, d.rise);
      g += rng.normal(0.0, kNoiseStddev);
      g = std::clamp(std::round(g), kGlucoseFloor, kGlucoseCeiling);

      GlucoseRecord r;
      r.minute = epoch_minute + static_cast<std::int64_t>(t);
      r.basal = basal_rate;
      const double tod = std::fmod(t, 1440.0);
      r.extra = std::round((0.5 + 0.4 * std::sin(2.0 * std::numbers::pi * (tod - 360.0) / 1440.0) +
                            rng.normal(0.0, 0.03)) * 1000.0) / 1000.0;
      while (next_meal < meal_events.size() && meal_events[next_meal].first < t + kGridMinutes) {
        if (meal_events[next_meal].first >= t) {
          r.carbs += meal_events[next_meal].second;
          r.bolus += std::round(meal_events[next_meal].second / kCarbRatio * 10.0) / 10.0;
        }
        ++next_meal;
      }

      if (gap_left == 0 && rng.bernoulli(kGapStartProbability)) {
        gap_left = 1 + static_cast<int>(rng.index(4));
      }
      if (gap_left > 0) {
        --gap_left;
      } else {
        r.glucose = g;
      }
      subject.records.push_back(r);
    }
    subjects.push_back(std::move(subject));
  }
  return subjects;
}

}  // namespace seqformer
