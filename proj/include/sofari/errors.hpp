#pragma once

#include <stdexcept>
#include <string>

namespace sofari {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConstraintViolation : Error { using Error::Error; };
struct AntipodalPoint : Error { using Error::Error; };
struct SupportOverflow : Error { using Error::Error; };
struct RankDeficiency : Error { using Error::Error; };
struct RankTooLarge : Error { using Error::Error; };
struct DegenerateColumn : Error { using Error::Error; };
struct DegenerateLayer : Error { using Error::Error; };

struct SingularInnerMatrix : Error {
  double condition;
  SingularInnerMatrix(const std::string& what, double cond) : Error(what), condition(cond) {}
};

struct InvalidArgument : Error { using Error::Error; };

}  // namespace sofari
