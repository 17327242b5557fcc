#pragma once

// Random mutation sequences checked against the shadow graph model.

#include "deepsearch/graph.hpp"

#include "oracles.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <string>

namespace dagcheck {

/// Runs one sequence of up to `steps` random add_node / add_edge calls on a
/// graph of at most 16 nodes, then executes it to a fixpoint. Returns an
/// empty string when every property held, otherwise the first violation.
inline std::string run_trial(std::mt19937& rng, int trial, int steps = 40) {
    using namespace deepsearch;
    ThoughtGraph g("question " + std::to_string(trial));
    oracle::ModelGraph model;
    model.nodes.push_back({"root", false, NodeState::Done});
    std::uniform_int_distribution<int> op(0, 2);
    for (int step = 0; step < steps; ++step) {
        auto where = " at step " + std::to_string(step);
        if (op(rng) == 0 && model.nodes.size() < 16) {
            bool end = std::uniform_int_distribution<int>(0, 9)(rng) == 0;
            std::string name = end ? "response" : "n" + std::to_string(std::uniform_int_distribution<int>(0, 20)(rng));
            bool dup = model.find(name) != nullptr;
            try {
                g.add_node(name, "content of " + name);
                if (dup) return "duplicate node " + name + " accepted" + where;
                model.nodes.push_back({name, end, NodeState::Pending});
            } catch (const GraphError& e) {
                if (!dup || e.code() != GraphErrc::DuplicateNode) return "add_node " + name + " rejected" + where;
            }
        } else {
            std::uniform_int_distribution<std::size_t> pick(0, model.nodes.size() - 1);
            auto a = model.nodes[pick(rng)];
            auto b = model.nodes[pick(rng)];
            bool existing = model.has_edge(a.name, b.name);
            bool expect_cycle = a.name != b.name && !a.is_end && !existing && model.path(b.name, a.name);
            auto edge = a.name + " -> " + b.name;
            try {
                bool added = g.add_edge(a.name, b.name);
                if (a.name == b.name || a.is_end || expect_cycle) return "edge " + edge + " accepted" + where;
                if (added == existing) return "edge " + edge + " idempotence broken" + where;
                if (added) model.edges.emplace_back(a.name, b.name);
            } catch (const GraphError& e) {
                auto expected = a.name == b.name ? GraphErrc::SelfLoop
                                : a.is_end       ? GraphErrc::EdgeFromEnd
                                                 : GraphErrc::CycleCreated;
                if (e.code() != expected || (expected == GraphErrc::CycleCreated && !expect_cycle))
                    return "edge " + edge + " rejected with the wrong code" + where;
            }
        }
        std::vector<std::string> names;
        for (const auto& n : model.nodes) names.push_back(n.name);
        if (!oracle::kahn_acyclic(names, g.edges())) return "cycle present" + where;
        if (g.ready_nodes() != oracle::brute_force_ready(model)) return "ready set differs from the oracle" + where;
    }

    // Fixpoint execution: every pending node runs exactly once.
    std::map<std::string, int> visits;
    for (;;) {
        auto ready = g.ready_nodes();
        if (ready.empty()) break;
        auto before = ready;
        for (const auto& name : ready) {
            g.mark_running(name);
            g.record_result(name, NodeResponse{name, {}, "d"});
            model.find(name)->state = NodeState::Done;
            ++visits[name];
            // Finishing a node never retracts another ready node.
            auto now = g.ready_nodes();
            for (const auto& r : before)
                if (r != name && g.node(r).state == NodeState::Pending && std::find(now.begin(), now.end(), r) == now.end())
                    return "node " + r + " left the ready set";
            before = now;
        }
    }
    for (const auto& n : model.nodes) {
        if (n.name == "root") continue;
        if (visits[n.name] != 1) return "node " + n.name + " visited " + std::to_string(visits[n.name]) + " times";
        if (g.node(n.name).state != NodeState::Done) return "node " + n.name + " not done";
    }
    return {};
}

} // namespace dagcheck
