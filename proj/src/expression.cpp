#include "esdc/expression.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>

namespace esdc {

struct Expression::Node {
    enum class Kind { number, variable, add, sub, mul, div, neg };
    Kind kind;
    double value = 0.0;       // number
    std::size_t slot = 0;     // variable
    std::shared_ptr<const Node> lhs, rhs;
};

namespace {

using Node = Expression::Node;
using NodePtr = std::shared_ptr<const Node>;

struct Parser {
    const std::string& text;
    std::size_t pos = 0;
    std::vector<std::string>& identifiers;

    void skip_ws() {
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    }

    [[noreturn]] void fail(const std::string& what) {
        throw Error(ErrorCode::ParseError,
                    what + " at position " + std::to_string(pos) + " in '" + text + "'");
    }

    bool eat(char c) {
        skip_ws();
        if (pos < text.size() && text[pos] == c) {
            ++pos;
            return true;
        }
        return false;
    }

    NodePtr expr() {
        NodePtr node = term();
        while (true) {
            if (eat('+'))
                node = binary(Node::Kind::add, node, term());
            else if (eat('-'))
                node = binary(Node::Kind::sub, node, term());
            else
                return node;
        }
    }

    NodePtr term() {
        NodePtr node = factor();
        while (true) {
            if (eat('*'))
                node = binary(Node::Kind::mul, node, factor());
            else if (eat('/'))
                node = binary(Node::Kind::div, node, factor());
            else
                return node;
        }
    }

    NodePtr factor() {
        skip_ws();
        if (pos >= text.size()) fail("unexpected end of expression");
        const char c = text[pos];
        if (c == '(') {
            ++pos;
            NodePtr inner = expr();
            if (!eat(')')) fail("expected ')'");
            return inner;
        }
        if (c == '-') {
            ++pos;
            auto node = std::make_shared<Node>();
            node->kind = Node::Kind::neg;
            node->lhs = factor();
            return node;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
        fail(std::string("unexpected character '") + c + "'");
    }

    NodePtr number() {
        const char* start = text.c_str() + pos;
        char* end = nullptr;
        const double v = std::strtod(start, &end);
        if (end == start) fail("invalid number");
        pos += static_cast<std::size_t>(end - start);
        auto node = std::make_shared<Node>();
        node->kind = Node::Kind::number;
        node->value = v;
        return node;
    }

    NodePtr identifier() {
        const std::size_t start = pos;
        while (pos < text.size() &&
               (std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_'))
            ++pos;
        const std::string name = text.substr(start, pos - start);
        std::size_t slot = identifiers.size();
        for (std::size_t i = 0; i < identifiers.size(); ++i)
            if (identifiers[i] == name) slot = i;
        if (slot == identifiers.size()) identifiers.push_back(name);
        auto node = std::make_shared<Node>();
        node->kind = Node::Kind::variable;
        node->slot = slot;
        return node;
    }

    static NodePtr binary(Node::Kind kind, NodePtr lhs, NodePtr rhs) {
        auto node = std::make_shared<Node>();
        node->kind = kind;
        node->lhs = std::move(lhs);
        node->rhs = std::move(rhs);
        return node;
    }
};

double eval_node(const Node& node, std::span<const double> inputs) {
    switch (node.kind) {
        case Node::Kind::number: return node.value;
        case Node::Kind::variable: return inputs[node.slot];
        case Node::Kind::neg: {
            const double v = eval_node(*node.lhs, inputs);
            return is_na(v) ? kNa : -v;
        }
        default: break;
    }
    const double a = eval_node(*node.lhs, inputs);
    const double b = eval_node(*node.rhs, inputs);
    if (is_na(a) || is_na(b)) return kNa;
    switch (node.kind) {
        case Node::Kind::add: return a + b;
        case Node::Kind::sub: return a - b;
        case Node::Kind::mul: return a * b;
        case Node::Kind::div: return b == 0.0 ? kNa : a / b;
        default: return kNa;
    }
}

}  // namespace

Expression Expression::parse(const std::string& text) {
    Expression e;
    Parser parser{text, 0, e.identifiers_};
    NodePtr root = parser.expr();
    parser.skip_ws();
    if (parser.pos != text.size()) parser.fail("trailing input");
    e.root_ = std::move(root);
    return e;
}

double Expression::evaluate(std::span<const double> inputs) const {
    return eval_node(*root_, inputs);
}

DataCube evaluate_expression(const DataCube& cube, const std::string& expression,
                             const std::string& new_name) {
    const CubeSchema& schema = cube.schema();
    if (schema.variable_index(new_name))
        throw Error(ErrorCode::DuplicateName, "variable '" + new_name + "' already exists");
    const Expression expr = Expression::parse(expression);
    std::vector<std::size_t> slots;
    for (const auto& name : expr.identifiers()) {
        const auto v = schema.variable_index(name);
        if (!v) throw Error(ErrorCode::UnknownVariable, "no variable named '" + name + "'");
        slots.push_back(*v);
    }

    const std::size_t cells = volume(schema.shape());
    const std::size_t nvar = schema.variables.size();
    std::vector<double> values;
    values.reserve((nvar + 1) * cells);
    std::vector<NdArray> sources;
    sources.reserve(nvar);
    for (std::size_t v = 0; v < nvar; ++v) {
        sources.push_back(cube.materialise(v));
        values.insert(values.end(), sources.back().data.begin(), sources.back().data.end());
    }
    std::vector<double> inputs(slots.size());
    for (std::size_t i = 0; i < cells; ++i) {
        for (std::size_t k = 0; k < slots.size(); ++k) inputs[k] = sources[slots[k]].data[i];
        values.push_back(expr.evaluate(inputs));
    }

    CubeSchema out = schema;
    out.variables.push_back(new_name);
    AttributeSet attrs = cube.attributes();
    attrs.per_variable[new_name]["long_name"] = expression;
    DataCube result = DataCube::from_values(std::move(out), std::move(attrs), std::move(values));
    std::string escaped;
    for (char c : expression) {
        if (c == '"' || c == '\\') escaped += '\\';
        escaped += c;
    }
    return with_provenance(result, "evaluate_expression",
                           "{\"formula\":\"" + escaped + "\",\"name\":\"" + new_name + "\"}");
}

}  // namespace esdc
