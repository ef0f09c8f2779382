#pragma once

#include <memory>
#include <string>
#include <vector>

#include "esdc/core.hpp"

namespace esdc {

/// Parsed arithmetic expression over variable names:
///   expr   := term {("+"|"-") term}
///   term   := factor {("*"|"/") factor}
///   factor := NUMBER | IDENT | "(" expr ")" | "-" factor
/// NA propagates through every operator and division by zero yields NA.
class Expression {
  public:
    static Expression parse(const std::string& text);

    const std::vector<std::string>& identifiers() const { return identifiers_; }

    /// Evaluates with one value per identifier (same order as identifiers()).
    double evaluate(std::span<const double> inputs) const;

    struct Node;

  private:
    std::shared_ptr<const Node> root_;
    std::vector<std::string> identifiers_;
};

/// Adds `new_name` to the cube, computed cellwise from existing variables.
DataCube evaluate_expression(const DataCube& cube, const std::string& expression,
                             const std::string& new_name);

}  // namespace esdc
