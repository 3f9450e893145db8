#include "fpbound/fpsim.hpp"

#include <map>
#include <mutex>
#include <sstream>

namespace fpbound {

FPFormat FPFormat::precision(int p) {
  if (p < 2) throw std::invalid_argument("precision must be at least 2");
  FPFormat f;
  f.p = p;
  return f;
}
FPFormat FPFormat::binary32() { return precision(24); }
FPFormat FPFormat::binary64() { return precision(53); }
FPFormat FPFormat::binary128() { return precision(113); }
FPFormat FPFormat::binary64_ieee() {
  FPFormat f = precision(53);
  f.e_min = -1022;
  f.e_max = 1023;
  return f;
}

std::string FPFormat::name() const {
  if (e_min == -(1L << 30) && e_max == (1L << 30)) {
    if (p == 24) return "binary32";
    if (p == 53) return "binary64";
    if (p == 113) return "binary128";
  }
  return "p" + std::to_string(p);
}

Rational FPNum::value() const { return Rational(M) * pow2(e - fmt.p + 1); }

std::string FPNum::str() const {
  if (is_zero()) return "0";
  return M.get_str() + "*2^" + std::to_string(e - fmt.p + 1);
}

FPNum fp_zero(const FPFormat& f) {
  FPNum z;
  z.fmt = f;
  return z;
}

FPNum rn(const Rational& x0, const FPFormat& f) {
  if (sgn(x0) == 0) return fp_zero(f);
  Rational x = x0;
  x.canonicalize();
  Rational ax = abs(x);
  long e = floor_log2(ax);
  if (e < f.e_min) throw UnderflowRange("rn: |x| below 2^e_min");
  // ax * 2^(p-1-e) lies in [2^(p-1), 2^p)
  Rational scaled = ax * pow2(f.p - 1 - e);
  BigInt m = floor_q(scaled);
  Rational rem = scaled - Rational(m);
  int c = cmp(rem, Rational(1, 2));
  if (c > 0 || (c == 0 && mpz_odd_p(m.get_mpz_t()))) m += 1;
  if (m == pow2z(static_cast<unsigned long>(f.p))) {
    m = pow2z(static_cast<unsigned long>(f.p - 1));
    ++e;
  }
  if (e > f.e_max) throw OverflowRange("rn: result exceeds the largest finite number");
  FPNum r;
  r.M = sgn(x) < 0 ? BigInt(-m) : m;
  r.e = e;
  r.fmt = f;
  return r;
}

FPNum fp_exact(const Rational& x0, const FPFormat& f) {
  Rational x = x0;
  x.canonicalize();
  FPNum r = rn(x, f);
  if (r.value() != x) throw NotRepresentable(to_string(x) + " is not a " + f.name() + " number");
  return r;
}

namespace {

const FPFormat& common(const FPNum& a, const FPNum& b) {
  if (!(a.fmt == b.fmt)) throw std::invalid_argument("operands in different formats");
  return a.fmt;
}

long scale_of(const FPNum& a) { return a.e - a.fmt.p + 1; }

// RN(sign * (N + s) * 2^k) where s in (0, 1) when sticky is set, else 0.
// With sticky, N must carry at least p+2 bits so the guard bit is in N.
FPNum round_scaled(int sign, BigInt N, long k, bool sticky, const FPFormat& f) {
  if (sgn(N) == 0) return fp_zero(f);
  const long p = f.p;
  long bits = static_cast<long>(mpz_sizeinbase(N.get_mpz_t(), 2));
  long e = k + bits - 1;
  if (e < f.e_min) throw UnderflowRange("result below 2^e_min");
  if (bits > p) {
    long sh = bits - p;
    bool half = mpz_tstbit(N.get_mpz_t(), static_cast<mp_bitcnt_t>(sh - 1));
    bool below = sticky || static_cast<long>(mpz_scan1(N.get_mpz_t(), 0)) < sh - 1;
    mpz_fdiv_q_2exp(N.get_mpz_t(), N.get_mpz_t(), static_cast<mp_bitcnt_t>(sh));
    if (half && (below || mpz_odd_p(N.get_mpz_t()))) N += 1;
    if (mpz_sizeinbase(N.get_mpz_t(), 2) > static_cast<std::size_t>(p)) {
      N >>= 1;
      ++e;
    }
  } else {
    N <<= static_cast<mp_bitcnt_t>(p - bits);
  }
  if (e > f.e_max) throw OverflowRange("result exceeds the largest finite number");
  FPNum r;
  r.M = sign < 0 ? BigInt(-N) : N;
  r.e = e;
  r.fmt = f;
  return r;
}

// sign * N * 2^k for the exact sum of two scaled integers.
void exact_sum(const BigInt& a, long ka, const BigInt& b, long kb, BigInt& n, long& k) {
  if (sgn(a) == 0) {
    n = b;
    k = kb;
    return;
  }
  if (sgn(b) == 0) {
    n = a;
    k = ka;
    return;
  }
  k = std::min(ka, kb);
  n = (a << static_cast<mp_bitcnt_t>(ka - k)) + (b << static_cast<mp_bitcnt_t>(kb - k));
}

FPNum round_exact(const BigInt& n, long k, const FPFormat& f) {
  return round_scaled(sgn(n), abs(n), k, false, f);
}

}  // namespace

FPNum fp_add(const FPNum& a, const FPNum& b) {
  const FPFormat& f = common(a, b);
  BigInt n;
  long k;
  exact_sum(a.M, scale_of(a), b.M, scale_of(b), n, k);
  return round_exact(n, k, f);
}

FPNum fp_sub(const FPNum& a, const FPNum& b) { return fp_add(a, fp_neg(b)); }

FPNum fp_mul(const FPNum& a, const FPNum& b) {
  const FPFormat& f = common(a, b);
  return round_exact(a.M * b.M, scale_of(a) + scale_of(b), f);
}

FPNum fp_div(const FPNum& a, const FPNum& b) {
  const FPFormat& f = common(a, b);
  if (b.is_zero()) throw DomainError("fp_div: zero divisor");
  if (a.is_zero()) return fp_zero(f);
  // q = floor(|Ma| * 2^s / |Mb|) has at least p+2 bits
  long s = f.p + 2;
  BigInt num = abs(a.M) << static_cast<mp_bitcnt_t>(s);
  BigInt den = abs(b.M);
  BigInt q, r;
  mpz_fdiv_qr(q.get_mpz_t(), r.get_mpz_t(), num.get_mpz_t(), den.get_mpz_t());
  return round_scaled(a.sign() * b.sign(), q, scale_of(a) - scale_of(b) - s, sgn(r) != 0, f);
}

FPNum fp_fma(const FPNum& a, const FPNum& b, const FPNum& c) {
  common(a, b);
  const FPFormat& f = common(a, c);
  BigInt n;
  long k;
  exact_sum(a.M * b.M, scale_of(a) + scale_of(b), c.M, scale_of(c), n, k);
  return round_exact(n, k, f);
}

FPNum fp_sqrt(const FPNum& a) {
  if (a.sign() < 0) throw DomainError("fp_sqrt: negative operand");
  if (a.is_zero()) return a;
  const int p = a.fmt.p;
  // a = M * 2^k; write a = N * 2^(2h) with N = M * 2^s >= 2^(2p+2)
  long k = scale_of(a);
  long s = p + 3;
  if (((k - s) % 2 + 2) % 2 != 0) ++s;
  long h = (k - s) / 2;
  BigInt N = a.M << static_cast<mp_bitcnt_t>(s);
  BigInt r = isqrt(N);
  long t = static_cast<long>(mpz_sizeinbase(r.get_mpz_t(), 2)) - p;  // >= 2
  BigInt q = r >> static_cast<mp_bitcnt_t>(t);
  // round sqrt(N) against the midpoint (2q+1) * 2^(t-1); a tie needs N to
  // be that perfect square
  BigInt mid = (2 * q + 1) << static_cast<mp_bitcnt_t>(t - 1);
  int c = cmp(N, BigInt(mid * mid));
  if (c > 0 || (c == 0 && mpz_odd_p(q.get_mpz_t()))) q += 1;
  return round_exact(q, t + h, a.fmt);
}

FPNum fp_neg(const FPNum& a) {
  FPNum r = a;
  r.M = -r.M;
  return r;
}

FPNum fp_abs(const FPNum& a) { return a.sign() < 0 ? fp_neg(a) : a; }

FPNum fp_scale(const FPNum& a, long k) {
  if (a.is_zero()) return a;
  FPNum r = a;
  r.e += k;
  if (r.e > r.fmt.e_max) throw OverflowRange("fp_scale overflow");
  if (r.e < r.fmt.e_min) throw UnderflowRange("fp_scale underflow");
  return r;
}

namespace {

// Compares |a| and |b| through exponents and significands.
int cmp_abs(const FPNum& a, const FPNum& b) {
  if (a.is_zero() || b.is_zero()) return static_cast<int>(!a.is_zero()) - static_cast<int>(!b.is_zero());
  if (a.e != b.e) return a.e < b.e ? -1 : 1;
  int c = mpz_cmpabs(a.M.get_mpz_t(), b.M.get_mpz_t());
  return (c > 0) - (c < 0);
}

}  // namespace

bool fp_less(const FPNum& a, const FPNum& b) {
  if (a.sign() != b.sign()) return a.sign() < b.sign();
  int c = cmp_abs(a, b);
  return a.sign() >= 0 ? c < 0 : c > 0;
}

std::pair<FPNum, FPNum> fast_two_sum(const FPNum& a, const FPNum& b) {
  common(a, b);
  bool ok = cmp_abs(a, b) >= 0 || (!a.is_zero() && !b.is_zero() && a.e >= b.e);
  if (!ok) throw PreconditionViolated("fast_two_sum needs |a| >= |b|");
  FPNum s = fp_add(a, b);
  FPNum z = fp_sub(s, a);
  FPNum t = fp_sub(b, z);
  return {s, t};
}

std::pair<FPNum, FPNum> fast_two_mult(const FPNum& a, const FPNum& b) {
  FPNum h = fp_mul(a, b);
  FPNum l = fp_fma(a, b, fp_neg(h));
  return {h, l};
}

HypotAlgo hypot_algo_from_string(const std::string& s) {
  static const std::map<std::string, HypotAlgo> names = {
      {"algo1", HypotAlgo::Naive},  {"naive", HypotAlgo::Naive},   {"1", HypotAlgo::Naive},
      {"algo2", HypotAlgo::Scaled}, {"scaled", HypotAlgo::Scaled}, {"2", HypotAlgo::Scaled},
      {"algo3", HypotAlgo::Beebe},  {"beebe", HypotAlgo::Beebe},   {"3", HypotAlgo::Beebe},
      {"algo4", HypotAlgo::Borges}, {"borges", HypotAlgo::Borges}, {"4", HypotAlgo::Borges},
      {"algo5", HypotAlgo::Kahan},  {"kahan", HypotAlgo::Kahan},   {"5", HypotAlgo::Kahan}};
  auto it = names.find(s);
  if (it == names.end()) throw std::invalid_argument("unknown algorithm " + s);
  return it->second;
}

std::string to_string(HypotAlgo a) { return "algo" + std::to_string(static_cast<int>(a)); }

namespace {

void note(Transcript* t, const char* name, const FPNum& v) {
  if (t) t->add(name, v);
}

FPNum one(const FPFormat& f) {
  FPNum r;
  r.M = pow2z(static_cast<unsigned long>(f.p - 1));
  r.fmt = f;
  return r;
}

// |x| >= |y| after the swap.
void order(FPNum& x, FPNum& y) {
  x = fp_abs(x);
  y = fp_abs(y);
  if (fp_less(x, y)) std::swap(x, y);
}

// rn of an irrational constant c given by enclosures of increasing accuracy.
template <class Enclose>
FPNum rn_constant(const FPFormat& f, Enclose enclose) {
  for (int bits = f.p + 8;; bits *= 2) {
    RationalInterval c = enclose(bits);
    FPNum lo = rn(c.lo(), f), hi = rn(c.hi(), f);
    if (lo.value() == hi.value()) return lo;
  }
}

struct KahanConstants {
  FPNum r2, ph, pl;
};

const KahanConstants& kahan_constants_locked(const FPFormat& f) {
  static std::mutex mu;
  static std::map<std::pair<int, std::pair<long, long>>, KahanConstants> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto key = std::make_pair(f.p, std::make_pair(f.e_min, f.e_max));
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  auto sqrt2 = [](int bits) { return RationalInterval(Rational(2)).sqrt(bits); };
  KahanConstants k;
  k.r2 = rn_constant(f, sqrt2);
  k.ph = rn_constant(f, [&](int bits) { return RationalInterval(Rational(1)) + sqrt2(bits); });
  Rational ph = k.ph.value();
  // 1 + sqrt(2) - ph is tiny, so the enclosure of sqrt(2) must be much
  // finer than its magnitude
  k.pl = rn_constant(f, [&](int bits) { return RationalInterval(Rational(1) - ph) + sqrt2(2 * bits); });
  return cache.emplace(key, k).first->second;
}

const KahanConstants& kahan_constants(const FPFormat& f) {
  thread_local const KahanConstants* last = nullptr;
  thread_local FPFormat last_fmt;
  if (!last || !(last_fmt == f)) {
    last = &kahan_constants_locked(f);
    last_fmt = f;
  }
  return *last;
}

}  // namespace

FPNum hypot_naive(const FPNum& x, const FPNum& y, Transcript* t) {
  FPNum sx = fp_mul(x, x);
  note(t, "s_x", sx);
  FPNum sy = fp_mul(y, y);
  note(t, "s_y", sy);
  FPNum sigma = fp_add(sx, sy);
  note(t, "sigma", sigma);
  FPNum rho = fp_sqrt(sigma);
  note(t, "rho", rho);
  return rho;
}

FPNum hypot_scaled(const FPNum& x0, const FPNum& y0, Transcript* t) {
  FPNum x = x0, y = y0;
  order(x, y);
  if (x.is_zero()) return x;
  FPNum r = fp_div(y, x);
  note(t, "r", r);
  FPNum tt = fp_fma(r, r, one(x.fmt));
  note(t, "t", tt);
  FPNum s = fp_sqrt(tt);
  note(t, "s", s);
  FPNum rho = fp_mul(x, s);
  note(t, "rho", rho);
  return rho;
}

FPNum hypot_beebe(const FPNum& x0, const FPNum& y0, Transcript* t) {
  FPNum x = x0, y = y0;
  order(x, y);
  if (x.is_zero()) return x;
  FPNum r = fp_div(y, x);
  note(t, "r", r);
  FPNum tt = fp_fma(r, r, one(x.fmt));
  note(t, "t", tt);
  FPNum s = fp_sqrt(tt);
  note(t, "s", s);
  FPNum eps = fp_fma(fp_neg(s), s, tt);
  note(t, "epsilon", eps);
  FPNum c = fp_div(eps, fp_scale(s, 1));
  note(t, "c", c);
  FPNum nu = fp_mul(x, c);
  note(t, "nu", nu);
  FPNum rho = fp_fma(x, s, nu);
  note(t, "rho", rho);
  return rho;
}

FPNum hypot_borges(const FPNum& x0, const FPNum& y0, Transcript* t) {
  FPNum x = x0, y = y0;
  order(x, y);
  if (x.is_zero()) return x;
  auto [sxh, sxl] = fast_two_mult(x, x);
  note(t, "s_x^h", sxh);
  note(t, "s_x^l", sxl);
  auto [syh, syl] = fast_two_mult(y, y);
  note(t, "s_y^h", syh);
  note(t, "s_y^l", syl);
  auto [sh, sl] = fast_two_sum(sxh, syh);
  note(t, "sigma_h", sh);
  note(t, "sigma_l", sl);
  FPNum s = fp_sqrt(sh);
  note(t, "s", s);
  FPNum ds = fp_fma(fp_neg(s), s, sh);
  note(t, "delta_s", ds);
  FPNum t1 = fp_add(sxl, syl);
  note(t, "tau_1", t1);
  FPNum t2 = fp_add(ds, sl);
  note(t, "tau_2", t2);
  FPNum tau = fp_add(t1, t2);
  note(t, "tau", tau);
  FPNum c = fp_div(tau, s);
  note(t, "c", c);
  FPNum rho = fp_add(c.is_zero() ? c : fp_scale(c, -1), s);
  note(t, "rho", rho);
  return rho;
}

FPNum hypot_kahan(const FPNum& x0, const FPNum& y0, Transcript* t) {
  FPNum x = x0, y = y0;
  order(x, y);
  // the listing divides by y; hypot(x, 0) = x
  if (y.is_zero()) return x;
  const KahanConstants& k = kahan_constants(x.fmt);
  FPNum delta = fp_sub(x, y);
  note(t, "delta", delta);
  FPNum z;
  if (fp_less(y, delta)) {
    FPNum r = fp_div(x, y);
    note(t, "r", r);
    FPNum tt = fp_fma(r, r, one(x.fmt));
    note(t, "t", tt);
    FPNum s = fp_sqrt(tt);
    note(t, "s", s);
    z = fp_add(r, s);
  } else {
    FPNum r2 = fp_div(delta, y);
    note(t, "r2", r2);
    FPNum tr2 = r2.is_zero() ? r2 : fp_scale(r2, 1);
    note(t, "tr2", tr2);
    FPNum r3 = fp_fma(r2, r2, tr2);
    note(t, "r3", r3);
    FPNum r4 = fp_add(fp_scale(one(x.fmt), 1), r3);
    note(t, "r4", r4);
    FPNum s2 = fp_sqrt(r4);
    note(t, "s2", s2);
    FPNum d = fp_add(k.r2, s2);
    note(t, "d", d);
    FPNum q = fp_div(r3, d);
    note(t, "q", q);
    FPNum r5 = fp_add(k.pl, q);
    note(t, "r5", r5);
    FPNum r6 = fp_add(r5, r2);
    note(t, "r6", r6);
    z = fp_add(k.ph, r6);
  }
  note(t, "z", z);
  FPNum z2 = fp_div(y, z);
  note(t, "z2", z2);
  FPNum rho = fp_add(x, z2);
  note(t, "rho", rho);
  return rho;
}

FPNum run_hypot(HypotAlgo a, const FPNum& x, const FPNum& y, Transcript* t) {
  switch (a) {
    case HypotAlgo::Naive:
      return hypot_naive(x, y, t);
    case HypotAlgo::Scaled:
      return hypot_scaled(x, y, t);
    case HypotAlgo::Beebe:
      return hypot_beebe(x, y, t);
    case HypotAlgo::Borges:
      return hypot_borges(x, y, t);
    case HypotAlgo::Kahan:
      return hypot_kahan(x, y, t);
  }
  throw std::invalid_argument("unknown algorithm");
}

RationalInterval rel_error_over_u(const FPNum& rho, const FPNum& x, const FPNum& y) {
  Rational T = x.value() * x.value() + y.value() * y.value();
  if (sgn(T) == 0) throw DomainError("rel_error: x = y = 0");
  const int p = rho.fmt.p;
  Rational inv_u = pow2(p);
  Rational root;
  if (exact_sqrt(T, root)) {
    Rational e = abs(rho.value() / root - 1) * inv_u;
    return RationalInterval(e);
  }
  // |rho/sqrt(T) - 1| from an enclosure of sqrt(T) of relative width
  // 2^-(2p+24): the width in units of u stays below 2^-(p+20)
  RationalInterval sq = RationalInterval(T).sqrt(2 * p + 24);
  RationalInterval q = RationalInterval(rho.value()) / sq - RationalInterval(Rational(1));
  RationalInterval a = sgn(q.lo()) >= 0 ? q : sgn(q.hi()) <= 0 ? -q : RationalInterval(Rational(0), q.mag());
  return a * RationalInterval(inv_u);
}

ErrorMeasurement measure(HypotAlgo a, const FPNum& x, const FPNum& y) {
  ErrorMeasurement m;
  m.x = x;
  m.y = y;
  m.rho = run_hypot(a, x, y, &m.transcript);
  m.rel_error_over_u = rel_error_over_u(m.rho, x, y);
  return m;
}

}  // namespace fpbound
