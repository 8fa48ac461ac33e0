#pragma once

// Dimensioned quantities for the internal unit system.
//
// Every dimensioned value carries its dimension in the type. The stored number
// is always in canonical units: energies in eV, lengths in nm, times in ns.
// Conversions to and from other units are multiplications by the factors in
// kUnitTable.

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <compare>
#include <string>
#include <string_view>

#include "coulomb_hbt/error.hpp"

namespace coulomb_hbt {

struct Dimension {
  int energy = 0;
  int length = 0;
  int time = 0;

  constexpr bool operator==(const Dimension&) const = default;
};

enum class Unit {
  dimensionless,
  meV,
  eV,
  keV,
  MeV,
  nm,
  um,
  mm,
  cm,
  m,
  fs,
  ps,
  ns,
  us,
  s,
  nm_per_ns,
  m_per_s,
  cm_per_s,
  eV_nm,
  eV_ns,
  eV_s,
};

struct UnitInfo {
  Unit unit;
  std::string_view symbol;
  Dimension dimension;
  double to_canonical;
};

inline constexpr std::array<UnitInfo, 21> kUnitTable{{
    {Unit::dimensionless, "1", {0, 0, 0}, 1.0},
    {Unit::meV, "meV", {1, 0, 0}, 1e-3},
    {Unit::eV, "eV", {1, 0, 0}, 1.0},
    {Unit::keV, "keV", {1, 0, 0}, 1e3},
    {Unit::MeV, "MeV", {1, 0, 0}, 1e6},
    {Unit::nm, "nm", {0, 1, 0}, 1.0},
    {Unit::um, "um", {0, 1, 0}, 1e3},
    {Unit::mm, "mm", {0, 1, 0}, 1e6},
    {Unit::cm, "cm", {0, 1, 0}, 1e7},
    {Unit::m, "m", {0, 1, 0}, 1e9},
    {Unit::fs, "fs", {0, 0, 1}, 1e-6},
    {Unit::ps, "ps", {0, 0, 1}, 1e-3},
    {Unit::ns, "ns", {0, 0, 1}, 1.0},
    {Unit::us, "us", {0, 0, 1}, 1e3},
    {Unit::s, "s", {0, 0, 1}, 1e9},
    {Unit::nm_per_ns, "nm/ns", {0, 1, -1}, 1.0},
    {Unit::m_per_s, "m/s", {0, 1, -1}, 1.0},
    {Unit::cm_per_s, "cm/s", {0, 1, -1}, 1e-2},
    {Unit::eV_nm, "eV*nm", {1, 1, 0}, 1.0},
    {Unit::eV_ns, "eV*ns", {1, 0, 1}, 1.0},
    {Unit::eV_s, "eV*s", {1, 0, 1}, 1e9},
}};

constexpr const UnitInfo& unit_info(Unit u) {
  for (const auto& info : kUnitTable) {
    if (info.unit == u) return info;
  }
  return kUnitTable[0];
}

constexpr std::string_view to_string(Unit u) { return unit_info(u).symbol; }

constexpr Dimension dimension_of(Unit u) { return unit_info(u).dimension; }

/// Looks up a unit by its symbol; throws ParseError for unknown symbols.
inline Unit unit_from_symbol(std::string_view symbol) {
  for (const auto& info : kUnitTable) {
    if (info.symbol == symbol) return info.unit;
  }
  throw ParseError("unknown unit '" + std::string(symbol) + "'");
}

template <int E, int L, int T>
class Quantity {
 public:
  static constexpr Dimension dimension{E, L, T};

  constexpr Quantity() = default;

  /// Value expressed in `unit`; the unit must measure this dimension.
  Quantity(double value, Unit unit) {
    const auto& info = unit_info(unit);
    if (info.dimension != dimension) {
      throw DimensionError(std::string(info.symbol), canonical_symbol());
    }
    value_ = value * info.to_canonical;
  }

  static constexpr Quantity from_canonical(double v) {
    Quantity q;
    q.value_ = v;
    return q;
  }

  constexpr double canonical() const { return value_; }

  double in(Unit unit) const {
    const auto& info = unit_info(unit);
    if (info.dimension != dimension) {
      throw DimensionError(canonical_symbol(), std::string(info.symbol));
    }
    return value_ / info.to_canonical;
  }

  constexpr operator double() const
    requires(E == 0 && L == 0 && T == 0)
  {
    return value_;
  }

  constexpr Quantity operator-() const { return from_canonical(-value_); }
  constexpr Quantity& operator+=(Quantity o) {
    value_ += o.value_;
    return *this;
  }
  constexpr Quantity& operator-=(Quantity o) {
    value_ -= o.value_;
    return *this;
  }
  constexpr Quantity& operator*=(double k) {
    value_ *= k;
    return *this;
  }
  constexpr Quantity& operator/=(double k) {
    value_ /= k;
    return *this;
  }

  friend constexpr Quantity operator+(Quantity a, Quantity b) {
    return from_canonical(a.value_ + b.value_);
  }
  friend constexpr Quantity operator-(Quantity a, Quantity b) {
    return from_canonical(a.value_ - b.value_);
  }
  friend constexpr Quantity operator*(Quantity a, double k) {
    return from_canonical(a.value_ * k);
  }
  friend constexpr Quantity operator*(double k, Quantity a) {
    return from_canonical(a.value_ * k);
  }
  friend constexpr Quantity operator/(Quantity a, double k) {
    return from_canonical(a.value_ / k);
  }
  friend constexpr auto operator<=>(Quantity a, Quantity b) {
    return a.value_ <=> b.value_;
  }
  friend constexpr bool operator==(Quantity a, Quantity b) {
    return a.value_ == b.value_;
  }

  static std::string canonical_symbol() {
    std::string out;
    auto term = [&out](const char* sym, int p) {
      if (p == 0) return;
      if (!out.empty()) out += "*";
      out += sym;
      if (p != 1) out += "^" + std::to_string(p);
    };
    term("eV", E);
    term("nm", L);
    term("ns", T);
    return out.empty() ? std::string("1") : out;
  }

 private:
  double value_ = 0.0;
};

template <int E1, int L1, int T1, int E2, int L2, int T2>
constexpr auto operator*(Quantity<E1, L1, T1> a, Quantity<E2, L2, T2> b) {
  return Quantity<E1 + E2, L1 + L2, T1 + T2>::from_canonical(a.canonical() *
                                                             b.canonical());
}

template <int E1, int L1, int T1, int E2, int L2, int T2>
constexpr auto operator/(Quantity<E1, L1, T1> a, Quantity<E2, L2, T2> b) {
  return Quantity<E1 - E2, L1 - L2, T1 - T2>::from_canonical(a.canonical() /
                                                             b.canonical());
}

template <int E, int L, int T>
constexpr auto operator/(double k, Quantity<E, L, T> a) {
  return Quantity<-E, -L, -T>::from_canonical(k / a.canonical());
}

template <int E, int L, int T>
  requires(E % 2 == 0 && L % 2 == 0 && T % 2 == 0)
auto sqrt(Quantity<E, L, T> q) {
  return Quantity<E / 2, L / 2, T / 2>::from_canonical(std::sqrt(q.canonical()));
}

template <int E, int L, int T>
  requires(E % 3 == 0 && L % 3 == 0 && T % 3 == 0)
auto cbrt(Quantity<E, L, T> q) {
  return Quantity<E / 3, L / 3, T / 3>::from_canonical(std::cbrt(q.canonical()));
}

using Dimensionless = Quantity<0, 0, 0>;
using Energy = Quantity<1, 0, 0>;
using Length = Quantity<0, 1, 0>;
using Time = Quantity<0, 0, 1>;
using Velocity = Quantity<0, 1, -1>;
using EnergyLength = Quantity<1, 1, 0>;
using EnergyTime = Quantity<1, 0, 1>;
/// eV*ns^2/nm^2, so that E = m v^2 / 2 stays in eV.
using Mass = Quantity<1, -2, 2>;
using InverseTime = Quantity<0, 0, -1>;

/// A number with a runtime unit tag, as read from a command line or file.
struct TaggedQuantity {
  double value = 0.0;
  Unit unit = Unit::dimensionless;

  constexpr bool operator==(const TaggedQuantity&) const = default;
};

/// Rescales `q` into `target`. Throws DimensionError naming both units when
/// they measure different dimensions.
inline TaggedQuantity convert(TaggedQuantity q, Unit target) {
  const auto& from = unit_info(q.unit);
  const auto& to = unit_info(target);
  if (from.dimension != to.dimension) {
    throw DimensionError(std::string(from.symbol), std::string(to.symbol));
  }
  if (q.unit == target) return q;
  return {q.value * from.to_canonical / to.to_canonical, target};
}

template <class Q>
Q quantity_cast(TaggedQuantity q) {
  return Q(q.value, q.unit);
}

/// Parses "50keV", "0.2 ns", "2.2e6m/s". A bare number is rejected: every
/// dimensioned input must state its unit.
inline TaggedQuantity parse_quantity(std::string_view text) {
  auto trim = [](std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
      s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
      s.remove_suffix(1);
    return s;
  };
  text = trim(text);
  double value = 0.0;
  const char* begin = text.data();
  const char* end = text.data() + text.size();
  if (!text.empty() && *begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr == begin) {
    throw ParseError("cannot parse a number from '" + std::string(text) + "'");
  }
  std::string_view suffix = trim(std::string_view(ptr, static_cast<std::size_t>(end - ptr)));
  if (suffix.empty()) {
    throw ParseError("missing unit suffix in '" + std::string(text) + "'");
  }
  if (!std::isfinite(value)) {
    throw ParseError("non-finite value in '" + std::string(text) + "'");
  }
  return {value, unit_from_symbol(suffix)};
}

template <class Q>
Q parse_as(std::string_view text) {
  return quantity_cast<Q>(parse_quantity(text));
}

namespace literals {

#define COULOMB_HBT_UNIT_LITERAL(Type, suffix, unit)                        \
  inline Type operator""_##suffix(long double v) {                         \
    return Type(static_cast<double>(v), Unit::unit);                       \
  }                                                                        \
  inline Type operator""_##suffix(unsigned long long v) {                  \
    return Type(static_cast<double>(v), Unit::unit);                       \
  }

COULOMB_HBT_UNIT_LITERAL(Energy, meV, meV)
COULOMB_HBT_UNIT_LITERAL(Energy, eV, eV)
COULOMB_HBT_UNIT_LITERAL(Energy, keV, keV)
COULOMB_HBT_UNIT_LITERAL(Length, nm, nm)
COULOMB_HBT_UNIT_LITERAL(Length, um, um)
COULOMB_HBT_UNIT_LITERAL(Length, cm, cm)
COULOMB_HBT_UNIT_LITERAL(Length, m, m)
COULOMB_HBT_UNIT_LITERAL(Time, fs, fs)
COULOMB_HBT_UNIT_LITERAL(Time, ps, ps)
COULOMB_HBT_UNIT_LITERAL(Time, ns, ns)
COULOMB_HBT_UNIT_LITERAL(Time, s, s)

#undef COULOMB_HBT_UNIT_LITERAL

}  // namespace literals

}  // namespace coulomb_hbt
