#include "nlyap/candidate.hpp"

#include "nlyap/errors.hpp"

namespace nlyap {

ExprCandidate::ExprCandidate(std::size_t dim, Expr value, std::vector<Expr> gradient,
                             std::string label)
    : dim_(dim), label_(label.empty() ? value.to_string() : std::move(label)) {
  if (gradient.size() != dim) throw ArgumentError("ExprCandidate: gradient size");
  std::vector<Expr> single{value};
  value_program_ = ExprProgram(single, dim);
  std::vector<Expr> joint{value};
  joint.insert(joint.end(), gradient.begin(), gradient.end());
  joint_program_ = ExprProgram(joint, dim);
}

double ExprCandidate::value(std::span<const double> x) const {
  double out = 0.0;
  value_program_.eval(x, std::span<double>(&out, 1));
  return out;
}

double ExprCandidate::value_and_gradient(std::span<const double> x, std::span<double> grad) const {
  thread_local std::vector<double> buf;
  buf.resize(dim_ + 1);
  joint_program_.eval(x, buf);
  std::copy(buf.begin() + 1, buf.end(), grad.begin());
  return buf[0];
}

Interval ExprCandidate::enclose_value(std::span<const Interval> box) const {
  Interval out;
  value_program_.enclose(box, std::span<Interval>(&out, 1));
  return out;
}

Interval ExprCandidate::enclose_value_and_gradient(std::span<const Interval> box,
                                                   std::span<Interval> grad) const {
  thread_local std::vector<Interval> buf;
  buf.resize(dim_ + 1);
  joint_program_.enclose(box, buf);
  std::copy(buf.begin() + 1, buf.end(), grad.begin());
  return buf[0];
}

}  // namespace nlyap
