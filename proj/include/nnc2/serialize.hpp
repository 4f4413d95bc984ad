#ifndef NNC2_SERIALIZE_HPP
#define NNC2_SERIALIZE_HPP

// FuncExpr <-> JSON. Schema (format_version 1):
//   { "format_version": 1, "root": <node id>,
//     "sets":  [ { "dim", "margin", "inset", "cells": [[level, i, j], ...] }, ... ],
//     "nodes": [ { "type": ..., fields }, ... ] }
// Nodes are listed children-first and referenced by index, so shared subexpressions are stored once.
// Node fields:
//   poly     origin [x, y], c [6]
//   bump     center [x, y], r_in, r_out, dim
//   step     a, b
//   sum      children [ids]
//   product  children [ids]
//   scale    c, child
//   compose  child, A [4], b [2]
//   weight   set, index
//   glue     set, pieces [ids or null]
//   restrict child, lo [x, y], side
// Doubles are written in shortest round-trip form, so re-read expressions evaluate bit-identically.

#include <map>
#include <string>

#include "json.hpp"
#include "nnc2/errors.hpp"
#include "nnc2/funcexpr.hpp"

namespace nnc2 {

inline constexpr int kFuncExprFormat = 1;

namespace detail {

struct Writer {
    nlohmann::json nodes = nlohmann::json::array(), sets = nlohmann::json::array();
    std::map<const Node*, int> ids;
    std::map<const CellSet*, int> set_ids;

    static nlohmann::json vec(const Vec2& v) { return {v[0], v[1]}; }

    int set(const CellSetPtr& s) {
        auto it = set_ids.find(s.get());
        if (it != set_ids.end()) return it->second;
        nlohmann::json cells = nlohmann::json::array();
        for (const auto& c : s->cells()) cells.push_back({c.level, c.i, c.j});
        sets.push_back({{"dim", s->dim()}, {"margin", s->margin()}, {"inset", s->inset()}, {"cells", cells}});
        return set_ids[s.get()] = int(sets.size()) - 1;
    }

    int node(const FuncExpr& e) {
        auto it = ids.find(e.get());
        if (it != ids.end()) return it->second;
        nlohmann::json j;
        using K = Node::Kind;
        switch (e->kind()) {
        case K::Poly: {
            auto* p = static_cast<const PolyNode*>(e.get());
            j = {{"type", "poly"}, {"origin", vec(p->origin)}, {"c", p->c}};
            break;
        }
        case K::Bump: {
            auto* p = static_cast<const BumpNode*>(e.get());
            j = {{"type", "bump"}, {"center", vec(p->center)}, {"r_in", p->r_in}, {"r_out", p->r_out}, {"dim", p->dim}};
            break;
        }
        case K::Step: {
            auto* p = static_cast<const StepNode*>(e.get());
            j = {{"type", "step"}, {"a", p->a}, {"b", p->b}};
            break;
        }
        case K::Sum:
        case K::Product: {
            const auto& ch = e->kind() == K::Sum ? static_cast<const SumNode*>(e.get())->children
                                                 : static_cast<const ProductNode*>(e.get())->children;
            std::vector<int> c;
            for (const auto& x : ch) c.push_back(node(x));
            j = {{"type", e->kind() == K::Sum ? "sum" : "product"}, {"children", c}};
            break;
        }
        case K::Scale: {
            auto* p = static_cast<const ScaleNode*>(e.get());
            int c = node(p->child);
            j = {{"type", "scale"}, {"c", p->c}, {"child", c}};
            break;
        }
        case K::Compose: {
            auto* p = static_cast<const ComposeNode*>(e.get());
            int c = node(p->child);
            j = {{"type", "compose"}, {"child", c}, {"A", p->A}, {"b", vec(p->b)}};
            break;
        }
        case K::Weight: {
            auto* p = static_cast<const WeightNode*>(e.get());
            j = {{"type", "weight"}, {"set", set(p->set)}, {"index", p->index}};
            break;
        }
        case K::Glue: {
            auto* p = static_cast<const GlueNode*>(e.get());
            nlohmann::json pc = nlohmann::json::array();
            for (const auto& x : p->pieces) pc.push_back(x ? nlohmann::json(node(x)) : nlohmann::json(nullptr));
            j = {{"type", "glue"}, {"set", set(p->set)}, {"pieces", pc}};
            break;
        }
        case K::Restrict: {
            auto* p = static_cast<const RestrictNode*>(e.get());
            int c = node(p->child);
            j = {{"type", "restrict"}, {"child", c}, {"lo", vec(p->square.lo)}, {"side", p->square.side}};
            break;
        }
        }
        nodes.push_back(std::move(j));
        return ids[e.get()] = int(nodes.size()) - 1;
    }
};

inline Vec2 read_vec(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 2) throw InputError("funcexpr json: expected a 2-vector");
    return {j[0].get<double>(), j[1].get<double>()};
}

} // namespace detail

inline nlohmann::json funcexpr_to_json(const FuncExpr& e) {
    if (!e) throw InputError("funcexpr_to_json: null expression");
    detail::Writer w;
    int root = w.node(e);
    return {{"format_version", kFuncExprFormat}, {"root", root}, {"sets", w.sets}, {"nodes", w.nodes}};
}

inline FuncExpr funcexpr_from_json(const nlohmann::json& doc) {
    try {
        if (doc.value("format_version", -1) != kFuncExprFormat) throw InputError("funcexpr json: unsupported format_version");
        std::vector<CellSetPtr> sets;
        for (const auto& s : doc.at("sets")) {
            std::vector<DyadicCell> cells;
            for (const auto& c : s.at("cells")) cells.push_back({c.at(0).get<int>(), c.at(1).get<std::int64_t>(), c.at(2).get<std::int64_t>()});
            sets.push_back(std::make_shared<CellSet>(s.at("dim").get<int>(), std::move(cells), s.at("margin").get<double>(),
                                                     s.at("inset").get<double>()));
        }
        std::vector<FuncExpr> nodes;
        auto ref = [&](const nlohmann::json& j) -> FuncExpr {
            int k = j.get<int>();
            if (k < 0 || k >= int(nodes.size())) throw InputError("funcexpr json: forward or invalid node reference");
            return nodes[std::size_t(k)];
        };
        auto set_ref = [&](const nlohmann::json& j) -> CellSetPtr {
            int k = j.get<int>();
            if (k < 0 || k >= int(sets.size())) throw InputError("funcexpr json: invalid set reference");
            return sets[std::size_t(k)];
        };
        for (const auto& n : doc.at("nodes")) {
            std::string t = n.at("type").get<std::string>();
            FuncExpr e;
            if (t == "poly") {
                e = std::make_shared<PolyNode>(detail::read_vec(n.at("origin")), n.at("c").get<std::array<double, 6>>());
            } else if (t == "bump") {
                e = make_bump(detail::read_vec(n.at("center")), n.at("r_in").get<double>(), n.at("r_out").get<double>(),
                              n.at("dim").get<int>());
            } else if (t == "step") {
                e = make_step(n.at("a").get<double>(), n.at("b").get<double>());
            } else if (t == "sum" || t == "product") {
                std::vector<FuncExpr> ch;
                for (const auto& c : n.at("children")) ch.push_back(ref(c));
                if (t == "sum")
                    e = std::make_shared<SumNode>(std::move(ch));
                else
                    e = std::make_shared<ProductNode>(std::move(ch));
            } else if (t == "scale") {
                e = make_scale(n.at("c").get<double>(), ref(n.at("child")));
            } else if (t == "compose") {
                e = make_compose(ref(n.at("child")), n.at("A").get<std::array<double, 4>>(), detail::read_vec(n.at("b")));
            } else if (t == "weight") {
                auto s = set_ref(n.at("set"));
                int k = n.at("index").get<int>();
                if (k < 0 || k >= int(s->cells().size())) throw InputError("funcexpr json: weight index out of range");
                e = std::make_shared<WeightNode>(s, k);
            } else if (t == "glue") {
                std::vector<FuncExpr> pc;
                for (const auto& c : n.at("pieces")) pc.push_back(c.is_null() ? nullptr : ref(c));
                e = make_glue(set_ref(n.at("set")), std::move(pc));
            } else if (t == "restrict") {
                e = make_restrict(ref(n.at("child")), Square{detail::read_vec(n.at("lo")), n.at("side").get<double>()});
            } else {
                throw InputError("funcexpr json: unknown node type '" + t + "'");
            }
            nodes.push_back(std::move(e));
        }
        return ref(doc.at("root"));
    } catch (const nlohmann::json::exception& ex) {
        throw InputError(std::string("funcexpr json: ") + ex.what());
    }
}

} // namespace nnc2

#endif
