#include "relmh/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace relmh {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

double log_factorial(int64_t k) {
  double s = 0.0;
  for (int64_t i = 2; i <= k; ++i) s += std::log(static_cast<double>(i));
  return s;
}

double log_falling_factorial(int64_t n, int64_t m) {
  if (m < 0 || n < 0 || m > n) return kNegInf;
  double s = 0.0;
  for (int64_t i = n - m + 1; i <= n; ++i) s += std::log(static_cast<double>(i));
  return s;
}

DistInstance DistInstance::point_mass(Value v) {
  DistInstance d;
  d.kind = DistKind::PointMass;
  d.point = std::move(v);
  return d;
}

namespace {

// Enumerates the 2^(k-1) separator patterns of non-empty components and calls
// fn(rendered, n_canonical, n_degraded) for each. k is small in practice.
void for_each_rendering(const std::vector<std::string>& parts, const std::string& sep,
                        const std::function<void(const std::string&, int, int)>& fn) {
  std::vector<const std::string*> nonempty;
  for (const auto& p : parts)
    if (!p.empty()) nonempty.push_back(&p);
  if (nonempty.empty()) {
    fn(std::string(), 0, 0);
    return;
  }
  int slots = static_cast<int>(nonempty.size()) - 1;
  for (uint32_t bits = 0; bits < (1u << slots); ++bits) {
    std::string out = *nonempty[0];
    int degraded = 0;
    for (int i = 0; i < slots; ++i) {
      if (bits & (1u << i)) {
        out += " ";
        ++degraded;
      } else {
        out += " " + sep + " ";
      }
      out += *nonempty[i + 1];
    }
    fn(out, slots - degraded, degraded);
  }
}

bool token_in(const std::vector<std::string>& vocab, const std::string& tok) {
  return std::find(vocab.begin(), vocab.end(), tok) != vocab.end();
}

}  // namespace

double DistInstance::log_mass(const Value& v) const {
  switch (kind) {
    case DistKind::PointMass:
      return v == point ? 0.0 : kNegInf;

    case DistKind::Categorical: {
      for (const auto& [val, p] : categorical)
        if (val == v) return p > 0 ? std::log(p) : kNegInf;
      return kNegInf;
    }

    case DistKind::Bernoulli:
      if (!v.is_bool()) return kNegInf;
      return std::log(v.as_bool() ? p : 1.0 - p);

    case DistKind::UniformOverObjects: {
      int64_t total = object_total();
      if (total <= 0) return kNegInf;
      if (v.is_guaranteed() && v.obj_type() == obj_type) return -std::log(double(total));
      if (v.is_numbered() && v.obj_type() == obj_type && v.obj_index() >= 1 &&
          v.obj_index() <= n_count)
        return -std::log(double(total));
      // Any single abstract identifier of the type denotes one object; its
      // mass equals any concrete object's mass.
      if (v.is_ident() && v.obj_type() == obj_type) return -std::log(double(total));
      return kNegInf;
    }

    case DistKind::UniformInt:
      if (!v.is_nat() || v.as_nat() < lo || v.as_nat() > hi) return kNegInf;
      return -std::log(double(hi - lo + 1));

    case DistKind::Poisson: {
      if (!v.is_nat() || v.as_nat() < 0) return kNegInf;
      int64_t k = v.as_nat();
      return -lambda + k * std::log(lambda) - log_factorial(k);
    }

    case DistKind::Geometric: {
      // Support 0, 1, 2, ...: P(k) = p * (1-p)^k.
      if (!v.is_nat() || v.as_nat() < 0) return kNegInf;
      return std::log(geo_p) + v.as_nat() * std::log1p(-geo_p);
    }

    case DistKind::NoisyCopy:
      if (!v.is_bool()) return kNegInf;
      return std::log(v.as_bool() == source ? fidelity : 1.0 - fidelity);

    case DistKind::TokenStringModel: {
      if (!v.is_str()) return kNegInf;
      std::vector<std::string> toks = tokenize(v.as_str());
      double V = static_cast<double>(vocab->size());
      if (!str_source) {
        // Prior: length L >= 1 with mass len_p * (1-len_p)^(L-1), tokens
        // i.i.d. uniform over the vocabulary.
        if (toks.empty()) return kNegInf;
        for (const auto& t : toks)
          if (!token_in(*vocab, t)) return kNegInf;
        return std::log(len_p) + (double(toks.size()) - 1.0) * std::log1p(-len_p) -
               double(toks.size()) * std::log(V);
      }
      std::vector<std::string> src = tokenize(*str_source);
      if (toks.size() != src.size()) return kNegInf;
      double lp = 0.0;
      for (size_t i = 0; i < toks.size(); ++i) {
        if (toks[i] == src[i]) {
          double keep = (1.0 - tok_eps) + (token_in(*vocab, src[i]) ? tok_eps / V : 0.0);
          lp += std::log(keep);
        } else if (token_in(*vocab, toks[i])) {
          lp += std::log(tok_eps / V);
        } else {
          return kNegInf;
        }
      }
      return lp;
    }

    case DistKind::StringConcatFormat: {
      if (!v.is_str()) return kNegInf;
      // Sum the probabilities of every separator pattern rendering v.
      double mass = 0.0;
      for_each_rendering(components, sep, [&](const std::string& out, int canon, int degr) {
        if (out == v.as_str())
          mass += std::pow(1.0 - sep_eps, canon) * std::pow(sep_eps, degr);
      });
      return mass > 0 ? std::log(mass) : kNegInf;
    }
  }
  return kNegInf;
}

Value DistInstance::sample(Rng& rng) const {
  switch (kind) {
    case DistKind::PointMass:
      return point;

    case DistKind::Categorical: {
      double u = rng.uniform();
      double cum = 0.0;
      for (const auto& [val, p] : categorical) {
        cum += p;
        if (u <= cum) return val;
      }
      return categorical.back().first;
    }

    case DistKind::Bernoulli:
      return Value::boolean(rng.bernoulli(p));

    case DistKind::UniformOverObjects: {
      int64_t total = object_total();
      if (total <= 0) throw ModelError("Uniform over an empty object set");
      int64_t k = static_cast<int64_t>(rng.below(static_cast<uint64_t>(total)));
      if (k < static_cast<int64_t>(guaranteed.size())) return guaranteed[k];
      return Value::numbered(obj_type, k - static_cast<int64_t>(guaranteed.size()) + 1);
    }

    case DistKind::UniformInt:
      return Value::nat(rng.range(lo, hi));

    case DistKind::Poisson: {
      // CDF inversion; fine at desk-scale rates.
      double u = rng.uniform();
      double pk = std::exp(-lambda);
      double cum = pk;
      int64_t k = 0;
      while (u > cum && k < 100000) {
        ++k;
        pk *= lambda / double(k);
        cum += pk;
      }
      return Value::nat(k);
    }

    case DistKind::Geometric: {
      double u = rng.uniform();
      double pk = geo_p;
      double cum = pk;
      int64_t k = 0;
      while (u > cum && k < 100000) {
        ++k;
        pk *= (1.0 - geo_p);
        cum += pk;
      }
      return Value::nat(k);
    }

    case DistKind::NoisyCopy:
      return Value::boolean(rng.bernoulli(fidelity) ? source : !source);

    case DistKind::TokenStringModel: {
      if (!str_source) {
        int64_t len = 1;
        while (!rng.bernoulli(len_p)) ++len;
        std::vector<std::string> toks;
        toks.reserve(len);
        for (int64_t i = 0; i < len; ++i)
          toks.push_back((*vocab)[rng.below(vocab->size())]);
        return Value::str(join_tokens(toks));
      }
      std::vector<std::string> toks = tokenize(*str_source);
      for (auto& t : toks)
        if (rng.bernoulli(tok_eps)) t = (*vocab)[rng.below(vocab->size())];
      return Value::str(join_tokens(toks));
    }

    case DistKind::StringConcatFormat: {
      std::vector<std::string> nonempty;
      for (const auto& c : components)
        if (!c.empty()) nonempty.push_back(c);
      std::string out;
      for (size_t i = 0; i < nonempty.size(); ++i) {
        if (i) out += rng.bernoulli(sep_eps) ? " " : " " + sep + " ";
        out += nonempty[i];
      }
      return Value::str(out);
    }
  }
  throw ModelError("sample: unhandled distribution kind");
}

std::optional<std::vector<Value>> DistInstance::finite_support() const {
  std::vector<Value> out;
  switch (kind) {
    case DistKind::PointMass:
      out.push_back(point);
      return out;

    case DistKind::Categorical:
      for (const auto& [val, p] : categorical)
        if (p > 0) out.push_back(val);
      return out;

    case DistKind::Bernoulli:
    case DistKind::NoisyCopy:
      out.push_back(Value::boolean(false));
      out.push_back(Value::boolean(true));
      return out;

    case DistKind::UniformOverObjects:
      for (const Value& g : guaranteed) out.push_back(g);
      for (int64_t i = 1; i <= n_count; ++i) out.push_back(Value::numbered(obj_type, i));
      return out;

    case DistKind::UniformInt:
      for (int64_t i = lo; i <= hi; ++i) out.push_back(Value::nat(i));
      return out;

    case DistKind::Poisson:
    case DistKind::Geometric:
      return std::nullopt;

    case DistKind::TokenStringModel: {
      if (!str_source) return std::nullopt;
      // Substitution noise preserves token count: enumerate per-token options.
      std::vector<std::string> src = tokenize(*str_source);
      std::vector<std::vector<std::string>> options;
      size_t count = 1;
      for (const auto& s : src) {
        std::vector<std::string> opts = *vocab;
        if (!token_in(*vocab, s)) opts.push_back(s);
        std::sort(opts.begin(), opts.end());
        count *= opts.size();
        if (count > 100000) return std::nullopt;
        options.push_back(std::move(opts));
      }
      std::vector<std::string> cur(src.size());
      std::function<void(size_t)> rec = [&](size_t i) {
        if (i == options.size()) {
          out.push_back(Value::str(join_tokens(cur)));
          return;
        }
        for (const auto& o : options[i]) {
          cur[i] = o;
          rec(i + 1);
        }
      };
      rec(0);
      std::sort(out.begin(), out.end());
      out.erase(std::unique(out.begin(), out.end()), out.end());
      return out;
    }

    case DistKind::StringConcatFormat: {
      for_each_rendering(components, sep, [&](const std::string& r, int, int) {
        out.push_back(Value::str(r));
      });
      std::sort(out.begin(), out.end());
      out.erase(std::unique(out.begin(), out.end()), out.end());
      return out;
    }
  }
  return std::nullopt;
}

}  // namespace relmh
