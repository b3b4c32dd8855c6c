#include "heavyflow/inverse_div.hpp"

#include "heavyflow/operators.hpp"

namespace heavyflow {

VectorField bogovskii(const ScalarField& r) {
  if (!r.all_finite())
    throw std::domain_error("bogovskii: non-finite input");
  const double total = integral(r);
  if (std::abs(total) > 1e-10 * lp_norm(r, 1.0))
    throw AdmissibilityError("bogovskii: input must have zero mean (integral = " +
                             std::to_string(total) + ")");
  const auto ops = StaggeredOps::get(r.grid());
  Vec b = ops->pack(r);
  b.array() -= detail::compensated_sum(b) / b.size();
  return ops->unpack(ops->grad() * neumann_solve(*ops, b));
}

double bogovskii_bound_check(const ScalarField& r) {
  const double rn = lp_norm(r, 2.0);
  if (rn == 0.0)
    throw std::invalid_argument("bogovskii_bound_check: zero input");
  return staggered_gradient_l2(bogovskii(r)) / rn;
}

} // namespace heavyflow
