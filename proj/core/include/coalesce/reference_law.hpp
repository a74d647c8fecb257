#pragma once

#include <memory>
#include <string>

#include "coalesce/survival.hpp"

namespace coalesce {

/// A law on [0, inf) given by its survival function, compared against samples.
class ReferenceLaw {
 public:
  virtual ~ReferenceLaw() = default;

  virtual double survival(double t) const = 0;
  double cdf(double t) const { return 1.0 - survival(t); }
  /// Integral of the survival function over [a, b], 0 <= a <= b.
  /// Default: adaptive Gauss-Kronrod to relative tolerance 1e-6.
  virtual double survival_integral(double a, double b) const;
  virtual double mean() const = 0;
  virtual std::string name() const = 0;
};

class ExponentialLaw final : public ReferenceLaw {
 public:
  explicit ExponentialLaw(double mean);
  double survival(double t) const override;
  double survival_integral(double a, double b) const override;
  double mean() const override { return mean_; }
  std::string name() const override;

 private:
  double mean_;
};

/// Survival evaluator wrapped as a law; uses its exact integral.
class CurveLaw final : public ReferenceLaw {
 public:
  explicit CurveLaw(std::shared_ptr<const SurvivalCurve> curve, std::string label = "curve");
  double survival(double t) const override;
  double survival_integral(double a, double b) const override;
  double mean() const override;
  std::string name() const override { return label_; }

 private:
  std::shared_ptr<const SurvivalCurve> curve_;
  std::string label_;
};

/// Law of c * X for a reference law X and c > 0.
class ScaledLaw final : public ReferenceLaw {
 public:
  ScaledLaw(std::shared_ptr<const ReferenceLaw> base, double scale);
  double survival(double t) const override;
  double survival_integral(double a, double b) const override;
  double mean() const override;
  std::string name() const override;

 private:
  std::shared_ptr<const ReferenceLaw> base_;
  double scale_;
};

}  // namespace coalesce
