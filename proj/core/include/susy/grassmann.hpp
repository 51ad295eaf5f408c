#pragma once
// Finite Grassmann algebra with an l1 norm on coefficients.
//
// Conventions fixed here and relied on everywhere else:
//  - generators are ordered lexicographically by (family, site, colour, charge),
//    with family psi < eta and charge plus < minus;
//  - a basis monomial is the product of its generators in ascending order,
//    stored as a bitmask over the context (at most 64 generators);
//  - the Berezin integral over a variable set X applies, per (site, colour)
//    in ascending order, first the minus then the plus integral, i.e. the
//    operator product prod_{(x,s)} int dpsi+ int dpsi- acting on the right.

#include <array>
#include <compare>
#include <complex>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <vector>

namespace susy::grassmann {

using cplx = std::complex<double>;

enum class Family : std::uint8_t { psi = 0, eta = 1 };
enum class Charge : std::uint8_t { plus = 0, minus = 1 };

// Lattice sites are points of Z^D with D <= 3; unused coordinates stay zero.
using Site = std::array<int, 3>;

struct GeneratorIndex {
  Family family = Family::psi;
  Site site{0, 0, 0};
  int colour = 0;
  Charge charge = Charge::plus;

  friend auto operator<=>(const GeneratorIndex&, const GeneratorIndex&) = default;
};

GeneratorIndex gen(Family f, Site x, int colour, Charge c);

class Context;
using ContextPtr = std::shared_ptr<const Context>;

// Immutable ordered generator list. Elements are combinable only when they
// hold the same Context object (pointer identity).
class Context {
 public:
  // Sorts; throws std::invalid_argument on duplicates or more than 64 entries.
  static ContextPtr make(std::vector<GeneratorIndex> gens);

  std::size_t size() const { return gens_.size(); }
  const GeneratorIndex& generator(std::size_t i) const { return gens_[i]; }
  const std::vector<GeneratorIndex>& generators() const { return gens_; }
  std::optional<std::size_t> find(const GeneratorIndex& g) const;
  std::uint64_t full_mask() const;

 private:
  explicit Context(std::vector<GeneratorIndex> gens) : gens_(std::move(gens)) {}
  std::vector<GeneratorIndex> gens_;
};

class Element {
 public:
  Element() = default;
  explicit Element(ContextPtr ctx) : ctx_(std::move(ctx)) {}
  Element(ContextPtr ctx, cplx scalar);

  static Element monomial(ContextPtr ctx, std::uint64_t mask, cplx coeff);
  // Single generator as an element.
  static Element generator(ContextPtr ctx, const GeneratorIndex& g);

  const ContextPtr& context() const { return ctx_; }
  const std::map<std::uint64_t, cplx>& coefficients() const { return coeffs_; }

  cplx coefficient(std::uint64_t mask) const;
  cplx scalar_part() const { return coefficient(0); }

  bool is_even() const;   // all monomials of even degree
  bool is_zero() const { return coeffs_.empty(); }

  double norm() const;    // l1 norm of coefficients

  Element& operator+=(const Element& o);
  Element& operator-=(const Element& o);
  Element& operator*=(cplx s);
  friend Element operator+(Element a, const Element& b) { return a += b; }
  friend Element operator-(Element a, const Element& b) { return a -= b; }
  friend Element operator*(Element a, cplx s) { return a *= s; }
  friend Element operator*(cplx s, Element a) { return a *= s; }
  friend Element operator*(const Element& a, const Element& b);

  // Re-express over a context containing every generator of this one.
  Element in_context(const ContextPtr& target) const;

  void set(std::uint64_t mask, cplx coeff);  // prunes exact zeros

 private:
  ContextPtr ctx_;
  std::map<std::uint64_t, cplx> coeffs_;
  friend Element mul_impl(const Element&, const Element&);
};

// Parity of the permutation interleaving two disjoint ascending masks.
int interleave_sign(std::uint64_t a, std::uint64_t b);

// Left derivative with respect to one generator; the Berezin integral over a
// single generator follows the same sign rule.
Element derivative(const Element& f, const GeneratorIndex& g);

// Berezin integral over all generators whose (family, site, colour) matches an
// entry of vars; integrates both charges. Result lives on the residual context.
struct VariableKey {
  Family family;
  Site site;
  int colour;
  friend auto operator<=>(const VariableKey&, const VariableKey&) = default;
};
Element berezin(const Element& f, const std::vector<VariableKey>& vars);
// Convenience: integrate every (site, colour) pair of the given family.
Element berezin_family(const Element& f, Family fam);

// exp of an even element with nilpotent part; throws on odd-degree terms.
Element exp_even(const Element& f);

// delta element: product over (site, colour) ascending of psi- psi+.
Element delta_element(const ContextPtr& ctx, Family fam);

// Fourier transform psi -> eta over a context holding both families with
// mirrored (site, colour) sets; kernel exp(-i sum (eta+ psi- + psi+ eta-)).
// Result lives on the eta-only residual context.
Element fourier(const Element& f);
// Inverse: eta -> psi with the +i kernel.
Element fourier_inverse(const Element& fhat);

}  // namespace susy::grassmann
