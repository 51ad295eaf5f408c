#include "susy/grassmann.hpp"

#include <algorithm>
#include <bit>
#include <stdexcept>

namespace susy::grassmann {

GeneratorIndex gen(Family f, Site x, int colour, Charge c) {
  return GeneratorIndex{f, x, colour, c};
}

ContextPtr Context::make(std::vector<GeneratorIndex> gens) {
  std::sort(gens.begin(), gens.end());
  if (std::adjacent_find(gens.begin(), gens.end()) != gens.end())
    throw std::invalid_argument("duplicate generator in context");
  if (gens.size() > 64)
    throw std::invalid_argument("context exceeds 64 generators");
  return ContextPtr(new Context(std::move(gens)));
}

std::optional<std::size_t> Context::find(const GeneratorIndex& g) const {
  auto it = std::lower_bound(gens_.begin(), gens_.end(), g);
  if (it == gens_.end() || *it != g) return std::nullopt;
  return static_cast<std::size_t>(it - gens_.begin());
}

std::uint64_t Context::full_mask() const {
  if (gens_.empty()) return 0;
  if (gens_.size() == 64) return ~std::uint64_t{0};
  return (std::uint64_t{1} << gens_.size()) - 1;
}

Element::Element(ContextPtr ctx, cplx scalar) : ctx_(std::move(ctx)) {
  if (scalar != cplx{0.0, 0.0}) coeffs_[0] = scalar;
}

Element Element::monomial(ContextPtr ctx, std::uint64_t mask, cplx coeff) {
  Element e(std::move(ctx));
  if ((mask & ~e.ctx_->full_mask()) != 0)
    throw std::invalid_argument("monomial mask outside context");
  e.set(mask, coeff);
  return e;
}

Element Element::generator(ContextPtr ctx, const GeneratorIndex& g) {
  auto pos = ctx->find(g);
  if (!pos) throw std::invalid_argument("generator not in context");
  return monomial(std::move(ctx), std::uint64_t{1} << *pos, 1.0);
}

cplx Element::coefficient(std::uint64_t mask) const {
  auto it = coeffs_.find(mask);
  return it == coeffs_.end() ? cplx{0.0, 0.0} : it->second;
}

bool Element::is_even() const {
  for (const auto& [m, c] : coeffs_)
    if (std::popcount(m) % 2 != 0) return false;
  return true;
}

double Element::norm() const {
  double n = 0.0;
  for (const auto& [m, c] : coeffs_) n += std::abs(c);
  return n;
}

void Element::set(std::uint64_t mask, cplx coeff) {
  if (coeff == cplx{0.0, 0.0})
    coeffs_.erase(mask);
  else
    coeffs_[mask] = coeff;
}

static void check_same_context(const Element& a, const Element& b) {
  if (a.context() != b.context())
    throw std::invalid_argument("elements live on different contexts");
}

Element& Element::operator+=(const Element& o) {
  check_same_context(*this, o);
  for (const auto& [m, c] : o.coeffs_) set(m, coefficient(m) + c);
  return *this;
}

Element& Element::operator-=(const Element& o) {
  check_same_context(*this, o);
  for (const auto& [m, c] : o.coeffs_) set(m, coefficient(m) - c);
  return *this;
}

Element& Element::operator*=(cplx s) {
  if (s == cplx{0.0, 0.0}) {
    coeffs_.clear();
    return *this;
  }
  for (auto& [m, c] : coeffs_) c *= s;
  return *this;
}

int interleave_sign(std::uint64_t a, std::uint64_t b) {
  // inversions: pairs (i in a, j in b) with i > j
  int inv = 0;
  std::uint64_t bb = b;
  while (bb) {
    int j = std::countr_zero(bb);
    bb &= bb - 1;
    inv += std::popcount(a & ~((std::uint64_t{2} << j) - 1));
  }
  return (inv % 2 == 0) ? 1 : -1;
}

Element operator*(const Element& a, const Element& b) {
  check_same_context(a, b);
  Element out(a.context());
  for (const auto& [ma, ca] : a.coefficients()) {
    for (const auto& [mb, cb] : b.coefficients()) {
      if (ma & mb) continue;  // repeated generator squares to zero
      cplx add = ca * cb * static_cast<double>(interleave_sign(ma, mb));
      out.set(ma | mb, out.coefficient(ma | mb) + add);
    }
  }
  return out;
}

Element Element::in_context(const ContextPtr& target) const {
  std::vector<int> remap(ctx_ ? ctx_->size() : 0, -1);
  for (std::size_t i = 0; i < remap.size(); ++i) {
    auto pos = target->find(ctx_->generator(i));
    if (!pos) throw std::invalid_argument("target context misses a generator");
    remap[i] = static_cast<int>(*pos);
  }
  Element out(target);
  for (const auto& [m, c] : coeffs_) {
    std::uint64_t nm = 0;
    std::uint64_t mm = m;
    while (mm) {
      int i = std::countr_zero(mm);
      mm &= mm - 1;
      nm |= std::uint64_t{1} << remap[static_cast<std::size_t>(i)];
    }
    out.set(nm, c);  // ascending order is preserved, no sign
  }
  return out;
}

// Removes generator bit `pos` acting from the left: sign (-1)^(#set bits below pos).
static Element strip_generator(const Element& f, std::size_t pos) {
  Element out(f.context());
  const std::uint64_t bit = std::uint64_t{1} << pos;
  const std::uint64_t below = bit - 1;
  for (const auto& [m, c] : f.coefficients()) {
    if (!(m & bit)) continue;
    int par = std::popcount(m & below);
    out.set(m & ~bit, (par % 2 == 0 ? c : -c));
  }
  return out;
}

Element derivative(const Element& f, const GeneratorIndex& g) {
  auto pos = f.context()->find(g);
  if (!pos) throw std::invalid_argument("generator not in context");
  return strip_generator(f, *pos);
}

// Rebuild the element on the context with the given generator positions removed.
static Element drop_from_context(const Element& f, std::uint64_t dropped) {
  const auto& old = f.context()->generators();
  std::vector<GeneratorIndex> kept;
  for (std::size_t i = 0; i < old.size(); ++i)
    if (!(dropped & (std::uint64_t{1} << i))) kept.push_back(old[i]);
  ContextPtr sub = Context::make(std::move(kept));
  Element out(sub);
  for (const auto& [m, c] : f.coefficients()) {
    if (m & dropped) throw std::logic_error("residual element uses dropped generator");
    std::uint64_t nm = 0;
    std::uint64_t mm = m;
    while (mm) {
      int i = std::countr_zero(mm);
      mm &= mm - 1;
      nm |= std::uint64_t{1}
            << (i - std::popcount(dropped & ((std::uint64_t{1} << i) - 1)));
    }
    out.set(nm, c);
  }
  return out;
}

Element berezin(const Element& f, const std::vector<VariableKey>& vars) {
  std::vector<VariableKey> v = vars;
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());

  // Operator string  prod_{(x,s) ascending} d+ d-  applied right to left.
  std::vector<std::size_t> order;  // application order
  std::uint64_t dropped = 0;
  for (auto it = v.rbegin(); it != v.rend(); ++it) {
    GeneratorIndex gm{it->family, it->site, it->colour, Charge::minus};
    GeneratorIndex gp{it->family, it->site, it->colour, Charge::plus};
    auto pm = f.context()->find(gm);
    auto pp = f.context()->find(gp);
    if (!pm || !pp) throw std::invalid_argument("integration variable not in context");
    order.push_back(*pm);
    order.push_back(*pp);
    dropped |= (std::uint64_t{1} << *pm) | (std::uint64_t{1} << *pp);
  }
  Element cur = f;
  for (std::size_t pos : order) cur = strip_generator(cur, pos);
  return drop_from_context(cur, dropped);
}

Element berezin_family(const Element& f, Family fam) {
  std::vector<VariableKey> vars;
  for (const auto& g : f.context()->generators())
    if (g.family == fam) vars.push_back(VariableKey{g.family, g.site, g.colour});
  return berezin(f, vars);
}

Element exp_even(const Element& f) {
  if (!f.is_even()) throw std::invalid_argument("exp_even needs an even element");
  cplx s0 = f.scalar_part();
  Element n = f;  // nilpotent part
  n.set(0, 0.0);
  Element acc(f.context(), 1.0);
  Element term(f.context(), 1.0);
  for (int k = 1; !term.is_zero(); ++k) {
    term = term * n;
    term *= cplx{1.0 / k, 0.0};
    acc += term;
    if (k > 64) throw std::logic_error("exp_even failed to terminate");
  }
  acc *= std::exp(s0);
  return acc;
}

Element delta_element(const ContextPtr& ctx, Family fam) {
  Element out(ctx, 1.0);
  // generators are sorted, so (site, colour) pairs appear ascending
  const auto& gens = ctx->generators();
  for (std::size_t i = 0; i < gens.size(); ++i) {
    if (gens[i].family != fam || gens[i].charge != Charge::plus) continue;
    GeneratorIndex gm = gens[i];
    gm.charge = Charge::minus;
    out = out * Element::generator(ctx, gm) * Element::generator(ctx, gens[i]);
  }
  return out;
}

namespace {

// Combined context holding f's generators of family `from` plus the mirrored
// family `to`, the kernel exp(sign * i * sum(to+ from- + from+ to-)), and the
// embedded input.
Element fourier_impl(const Element& f, Family from, Family to, double sign) {
  std::vector<GeneratorIndex> gens;
  std::vector<std::pair<Site, int>> pairs;
  for (const auto& g : f.context()->generators()) {
    gens.push_back(g);
    if (g.family != from) continue;
    if (g.charge == Charge::plus) pairs.emplace_back(g.site, g.colour);
    GeneratorIndex mirror{to, g.site, g.colour, g.charge};
    if (!f.context()->find(mirror)) gens.push_back(mirror);
  }
  std::sort(gens.begin(), gens.end());
  gens.erase(std::unique(gens.begin(), gens.end()), gens.end());
  ContextPtr ctx = Context::make(std::move(gens));

  Element expo(ctx);
  for (const auto& [site, colour] : pairs) {
    Element top = Element::generator(ctx, GeneratorIndex{to, site, colour, Charge::plus});
    Element tom = Element::generator(ctx, GeneratorIndex{to, site, colour, Charge::minus});
    Element frp = Element::generator(ctx, GeneratorIndex{from, site, colour, Charge::plus});
    Element frm = Element::generator(ctx, GeneratorIndex{from, site, colour, Charge::minus});
    expo += top * frm + frp * tom;
  }
  expo *= cplx{0.0, sign};
  Element integrand = exp_even(expo) * f.in_context(ctx);
  return berezin_family(integrand, from);
}

}  // namespace

Element fourier(const Element& f) { return fourier_impl(f, Family::psi, Family::eta, -1.0); }

Element fourier_inverse(const Element& fhat) {
  return fourier_impl(fhat, Family::eta, Family::psi, 1.0);
}

}  // namespace susy::grassmann
