// SPDX-License-Identifier: Apache-2.0
#include <kumo/analysis.hpp>
#include <kumo/cli.hpp>
#include <kumo/env_model.hpp>
#include <kumo/errors.hpp>
#include <kumo/metrics.hpp>
#include <kumo/oracle.hpp>
#include <kumo/service.hpp>
#include <kumo/synthetic.hpp>
#include <kumo/task_io.hpp>
#include <kumo/taskgen.hpp>
#include <kumo/trajectory_io.hpp>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace kumo;

PYBIND11_MODULE(_kumo, m)
{
    m.doc() = "Bindings for the kumo reasoning-benchmark core";

    static py::exception<Error> error(m, "KumoError", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try
        {
            if (p)
                std::rethrow_exception(p);
        }
        catch (const Error& e)
        {
            py::set_error(error, (std::string(e.what())).c_str());
        }
    });

    py::class_<SeedConfig>(m, "SeedConfig")
        .def_static("from_json", [](const std::string& text) { return parse_seed_config(text); })
        .def("to_json", [](const SeedConfig& c) { return serialize_seed_config(c); })
        .def_readonly("domain", &SeedConfig::domain)
        .def_readonly("goal", &SeedConfig::goal)
        .def_readonly("truths", &SeedConfig::truths)
        .def_property_readonly("actions", [](const SeedConfig& c) {
            std::vector<std::string> names;
            for (const auto& a : c.actions)
                names.push_back(a.name);
            return names;
        })
        .def("hash", [](const SeedConfig& c) { return config_hash(c); })
        .def("__eq__", [](const SeedConfig& a, const SeedConfig& b) { return a == b; });

    m.def("validate_config", [](const SeedConfig& c) {
        std::vector<std::string> codes;
        for (const auto& v : validate_seed_config(c).violations)
            codes.push_back(v.code);
        return codes;
    }, "Violation codes; empty when the config is valid");

    m.def("synthetic_config", [](int n_truths, int n_actions, int n_components, std::uint64_t seed, const std::string& domain) {
        SyntheticSpec s;
        s.n_truths = n_truths;
        s.n_actions = n_actions;
        s.n_components = n_components;
        s.seed = seed;
        s.domain = domain;
        return synthetic_config(s);
    }, py::arg("n_truths") = 20, py::arg("n_actions") = 24, py::arg("n_components") = 1, py::arg("seed") = 0,
          py::arg("domain") = "Synthetic");

    py::class_<TaskInstance>(m, "TaskInstance")
        .def_static("from_json", [](const std::string& text) { return task_from_json(text); })
        .def("to_json", [](const TaskInstance& t) { return task_to_json(t); })
        .def_readonly("id", &TaskInstance::id)
        .def_readonly("domain", &TaskInstance::domain)
        .def_readonly("truths", &TaskInstance::truths)
        .def_readonly("valid_truth", &TaskInstance::valid_truth)
        .def_property_readonly("actions", [](const TaskInstance& t) {
            std::vector<std::string> names;
            for (const auto& a : t.actions)
                names.push_back(a.name);
            return names;
        })
        .def_property_readonly("difficulty", &TaskInstance::difficulty)
        .def("invariant_violations", [](const TaskInstance& t) { return check_task_invariants(t); });

    m.def("generate_tasks", [](const SeedConfig& cfg, int n_truth, int n_action, int count, std::uint64_t seed) {
        GenParams p;
        p.n_truth = n_truth;
        p.n_action = n_action;
        p.count = count;
        p.rng_seed = seed;
        py::gil_scoped_release release;
        return generate_tasks(cfg, p);
    }, py::arg("config"), py::arg("n_truth") = 4, py::arg("n_action") = 6, py::arg("count") = 1, py::arg("seed") = 0);

    m.def("optimal_action_count", [](const TaskInstance& t, bool memoize, bool prune) {
        py::gil_scoped_release release;
        return optimal_action_count(t, { memoize, prune, 1e-9 });
    }, py::arg("task"), py::arg("memoize") = true, py::arg("prune") = true);
    m.def("brute_force_expected_steps", [](const TaskInstance& t) { return brute_force_expected_steps(t); });

    py::class_<Trajectory>(m, "Trajectory")
        .def_static("from_json", [](const std::string& text) { return trajectory_from_json(text); })
        .def("to_json", [](const Trajectory& t) { return trajectory_to_json(t); })
        .def_readonly("task_id", &Trajectory::task_id)
        .def_readonly("model", &Trajectory::model)
        .def_readonly("action_count", &Trajectory::action_count)
        .def_property_readonly("outcome", [](const Trajectory& t) { return std::string(to_string(t.outcome)); });

    m.def("load_trajectories", [](const std::string& path) {
        auto loaded = load_trajectories(path);
        return py::make_tuple(loaded.trajectories, loaded.corrupt_records);
    }, "Returns (trajectories, corrupt_record_count)");
    m.def("success_rate", [](const std::vector<Trajectory>& t) { return success_rate(t); });
    m.def("parsing_error_rate", [](const std::vector<Trajectory>& t) { return parsing_error_rate(t); });
    m.def("relative_action_count", [](const Trajectory& t, double optimal) { return relative_action_count(t, optimal); });
    m.def("pearson", [](const std::vector<double>& x, const std::vector<double>& y) { return pearson(x, y); });

    m.def("modularity", [](std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                           const std::vector<std::size_t>& community) {
        std::vector<std::string> nodes;
        for (std::size_t i = 0; i < n; ++i)
            nodes.push_back(std::to_string(i));
        return modularity(DomainGraph::from_edges(nodes, edges), community);
    });
    m.def("louvain", [](std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges, std::uint64_t seed) {
        std::vector<std::string> nodes;
        for (std::size_t i = 0; i < n; ++i)
            nodes.push_back(std::to_string(i));
        const auto p = louvain(DomainGraph::from_edges(nodes, edges), seed);
        return py::make_tuple(p.community, p.modularity);
    }, py::arg("n"), py::arg("edges"), py::arg("seed") = 0, "Returns (community per node, modularity)");
    m.def("chi_square_sf", &chi_square_sf);
    m.def("cramers_v", [](const std::vector<std::vector<std::int64_t>>& counts) { return cramers_v({ counts }); });
    m.def("split_environment", [](const SeedConfig& cfg) {
        auto s = split_environment(cfg);
        return py::make_tuple(s.first, s.second);
    });

    m.def("earnings", [](double success_rate, int actions) { return compute_earnings(success_rate, actions).total; });

    m.def("cli", [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
            py::gil_scoped_release release;
            code = cli_main(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
    }, "Runs a kumo subcommand in-process; returns (exit_code, stdout, stderr)");
}
