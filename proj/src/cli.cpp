// SPDX-License-Identifier: Apache-2.0
#include <kumo/agents.hpp>
#include <kumo/analysis.hpp>
#include <kumo/cli.hpp>
#include <kumo/errors.hpp>
#include <kumo/llm.hpp>
#include <kumo/llm_gen.hpp>
#include <kumo/metrics.hpp>
#include <kumo/oracle.hpp>
#include <kumo/registry.hpp>
#include <kumo/service.hpp>
#include <kumo/task_io.hpp>
#include <kumo/trajectory_io.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

namespace kumo
{

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace
{

std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot read '" + path.string() + "'");
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

struct Globals
{
    std::uint64_t seed = 0;
    std::string out;
    std::string registry;
    std::string endpoint = "mock";
    std::string model = "mock-llm";
    int mock_chunk = 0;
};

fs::path default_registry()
{
    if (const char* d = std::getenv("KUMO_DATA_DIR"); d && *d)
        return fs::path(d) / "registry";
    return "data/registry";
}

void emit(const Globals& g, std::ostream& out, const std::string& text)
{
    if (g.out.empty() || g.out == "-")
    {
        out << text;
        return;
    }
    const fs::path path(g.out);
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f << text;
    if (!f)
        throw IoError("cannot write '" + g.out + "'");
}

/// Keeps whatever objects a backend depends on alive for the command's duration.
struct Backend
{
    std::unique_ptr<SimulatedLlm> simulated;
    std::unique_ptr<MockLlmServer> server;
    std::unique_ptr<HttpChatClient> http;

    ChatBackend& get()
    {
        if (http)
            return *http;
        return *simulated;
    }
};

std::unique_ptr<Backend> make_backend(const Globals& g)
{
    auto b = std::make_unique<Backend>();
    SimulatedLlmOptions sim;
    sim.seed = g.seed;
    sim.chunk_chars = g.mock_chunk;
    if (g.endpoint == "mock")
    {
        b->simulated = std::make_unique<SimulatedLlm>(sim);
    }
    else if (g.endpoint == "mock-http")
    {
        b->simulated = std::make_unique<SimulatedLlm>(sim);
        b->server = std::make_unique<MockLlmServer>(*b->simulated);
        b->server->start();
        HttpChatOptions http;
        http.base_url = b->server->base_url();
        b->http = std::make_unique<HttpChatClient>(http);
    }
    else
    {
        HttpChatOptions http;
        http.base_url = g.endpoint;
        b->http = std::make_unique<HttpChatClient>(http);
    }
    return b;
}

struct EnvSource
{
    std::string env;
    std::string config;
};

void add_env_source(CLI::App* cmd, EnvSource& src)
{
    auto* env = cmd->add_option("--env", src.env, "Registered environment name");
    auto* cfg = cmd->add_option("--config", src.config, "Seed-config JSON file")->check(CLI::ExistingFile);
    env->excludes(cfg);
    cfg->excludes(env);
}

SeedConfig load_source(const Globals& g, const EnvSource& src)
{
    if (!src.config.empty())
        return parse_seed_config(read_file(src.config));
    if (src.env.empty())
        throw CLI::RequiredError("--env or --config");
    return Registry(g.registry).load(src.env);
}

DomainProposal proposal_from_file(const std::string& path)
{
    const auto doc = ojson::parse(read_file(path));
    const auto& first = doc.is_array() ? doc.at(0) : doc;
    return parse_proposal(first.dump());
}

ojson config_json(const SeedConfig& cfg)
{
    return ojson::parse(serialize_seed_config(cfg));
}

std::vector<std::string> split_list(const std::string& text)
{
    std::vector<std::string> out;
    std::stringstream in(text);
    for (std::string item; std::getline(in, item, ',');)
        if (!item.empty())
            out.push_back(item);
    return out;
}

OptimalLookup optimal_for(const std::vector<TaskInstance>& tasks, const std::string& cache_path)
{
    OptimalLookup lookup;
    if (!cache_path.empty() && fs::exists(cache_path))
        for (const auto& [id, v] : ojson::parse(read_file(cache_path)).items())
            lookup[id] = v.get<double>();
    bool added = false;
    for (const auto& t : tasks)
        if (!lookup.count(t.id))
        {
            lookup[t.id] = optimal_action_count(t);
            added = true;
        }
    if (added && !cache_path.empty())
    {
        ojson j = ojson::object();
        for (const auto& [id, v] : lookup)
            j[id] = v;
        std::ofstream(cache_path, std::ios::trunc) << j.dump(2) << '\n';
    }
    return lookup;
}

} // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app { "Knowledge-orthogonal reasoning benchmark toolkit", "kumo" };
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    g.registry = default_registry().string();
    app.add_option("--seed", g.seed, "Seed for every random choice");
    app.add_option("--out", g.out, "Output file (default: standard output)");
    app.add_option("--registry", g.registry, "Environment registry directory");
    app.add_option("--endpoint", g.endpoint, "LLM endpoint: mock, mock-http or a base URL");
    app.add_option("--model", g.model, "Model name sent to the endpoint");
    app.add_option("--mock-chunk", g.mock_chunk, "Mock replies longer than this are truncated and continued");

    // propose
    auto* propose = app.add_subcommand("propose", "Propose goal/truth/action settings for a domain");
    std::string domain;
    int count = 3;
    propose->add_option("--domain", domain, "Domain name")->required();
    propose->add_option("--count", count, "Number of proposals")->check(CLI::PositiveNumber);

    // gen-seed
    auto* gen_seed = app.add_subcommand("gen-seed", "Generate and validate a seed config");
    std::string proposal_path;
    SeedGenOptions seed_opts;
    bool do_register = false;
    gen_seed->add_option("--domain", domain, "Domain name")->required();
    gen_seed->add_option("--proposal", proposal_path, "Proposal JSON (object or array; first entry is used)")->check(CLI::ExistingFile);
    gen_seed->add_option("--truths", seed_opts.n_truths, "Number of truths")->check(CLI::PositiveNumber);
    gen_seed->add_option("--actions", seed_opts.n_actions, "Number of actions")->check(CLI::PositiveNumber);
    gen_seed->add_option("--attempts", seed_opts.max_attempts, "Regeneration attempts")->check(CLI::PositiveNumber);
    gen_seed->add_flag("--register", do_register, "Add the config to the registry");

    // gen-tasks
    auto* gen_tasks = app.add_subcommand("gen-tasks", "Sample task instances from a seed config");
    EnvSource src;
    GenParams params = EasyParams;
    params.count = 50;
    add_env_source(gen_tasks, src);
    gen_tasks->add_option("--truths", params.n_truth, "Truths per task")->check(CLI::PositiveNumber);
    gen_tasks->add_option("--actions", params.n_action, "Actions per task")->check(CLI::PositiveNumber);
    gen_tasks->add_option("--valid", params.n_valid, "Valid truths per task")->check(CLI::PositiveNumber);
    gen_tasks->add_option("--count", params.count, "Number of tasks")->check(CLI::PositiveNumber);

    // gen-book
    auto* gen_book = app.add_subcommand("gen-book", "Write and verify a knowledge book");
    int review_rounds = 2;
    bool save_book = false;
    add_env_source(gen_book, src);
    gen_book->add_option("--rounds", review_rounds, "Maximum revision rounds")->check(CLI::NonNegativeNumber);
    gen_book->add_flag("--save", save_book, "Store the book in the registry (needs --env)");

    // eval
    auto* eval = app.add_subcommand("eval", "Play task instances with an agent");
    std::string tasks_path, book_path, agent_kind = "random";
    int runs = 1;
    eval->add_option("--tasks", tasks_path, "Task bundle")->required()->check(CLI::ExistingFile);
    eval->add_option("--agent", agent_kind, "random, oracle or llm")->check(CLI::IsMember({ "random", "oracle", "llm" }));
    eval->add_option("--book", book_path, "Knowledge book (default: registry book, else a plain rendering)")->check(CLI::ExistingFile);
    eval->add_option("--runs", runs, "Runs per task")->check(CLI::PositiveNumber);

    // golden
    auto* golden = app.add_subcommand("golden", "Optimal-play transcripts for a task bundle");
    golden->add_option("--tasks", tasks_path, "Task bundle")->required()->check(CLI::ExistingFile);

    // analyze
    auto* analyze = app.add_subcommand("analyze", "Domain graph structure, or structure vs. performance");
    std::string trajectories_path;
    add_env_source(analyze, src);
    analyze->add_option("--tasks", tasks_path, "Task bundle for the structure test")->check(CLI::ExistingFile);
    analyze->add_option("--trajectories", trajectories_path, "Trajectories for the structure test")->check(CLI::ExistingFile);

    // split-env
    auto* split = app.add_subcommand("split-env", "Split a multi-component config into two environments");
    std::string names;
    add_env_source(split, src);
    split->add_option("--names", names, "Comma-separated names of the two halves");
    split->add_flag("--register", do_register, "Add both halves to the registry");

    // serve
    auto* serve = app.add_subcommand("serve", "Run the human play service");
    std::string host = "127.0.0.1", participants_path, data_dir;
    int port = 8080, pool = 10;
    serve->add_option("--host", host, "Bind address");
    serve->add_option("--port", port, "Port")->check(CLI::Range(1, 65535));
    serve->add_option("--participants", participants_path, "Participant table (id<TAB>token)")->required()->check(CLI::ExistingFile);
    serve->add_option("--data-dir", data_dir, "Session storage (default: KUMO_DATA_DIR)");
    serve->add_option("--pool", pool, "Number of pregenerated task sets")->check(CLI::PositiveNumber);

    // score
    auto* score = app.add_subcommand("score", "Aggregate metrics over trajectories");
    std::vector<std::string> bundle_paths;
    std::string group_by = "model", format = "table", optimal_cache;
    score->add_option("--trajectories", trajectories_path, "Trajectory log")->required()->check(CLI::ExistingFile);
    score->add_option("--tasks", bundle_paths, "Task bundles the trajectories were played on")->required()->check(CLI::ExistingFile);
    score->add_option("--group-by", group_by, "Comma list of domain, difficulty, model");
    score->add_option("--format", format, "table, csv or json")->check(CLI::IsMember({ "table", "csv", "json" }));
    score->add_option("--optimal-cache", optimal_cache, "JSON file caching optimal action counts");

    std::vector<const char*> argv { "kumo" };
    for (const auto& a : args)
        argv.push_back(a.c_str());
    try
    {
        app.parse(static_cast<int>(argv.size()), argv.data());
    }
    catch (const CLI::CallForHelp&)
    {
        out << app.help();
        return ExitOk;
    }
    catch (const CLI::CallForAllHelp&)
    {
        out << app.help("", CLI::AppFormatMode::All);
        return ExitOk;
    }
    catch (const CLI::ParseError& e)
    {
        err << "error: " << e.what() << "\n\n" << app.help();
        return ExitUsage;
    }

    try
    {
        if (*propose)
        {
            auto backend = make_backend(g);
            ojson j = ojson::array();
            for (const auto& p : propose_domains(backend->get(), g.model, domain, count))
                j.push_back(ojson::parse(serialize_proposal(p)));
            emit(g, out, j.dump(2) + "\n");
        }
        else if (*gen_seed)
        {
            auto backend = make_backend(g);
            const auto proposal = proposal_path.empty() ? propose_domains(backend->get(), g.model, domain, 1).front()
                                                        : proposal_from_file(proposal_path);
            seed_opts.seed = g.seed;
            const auto cfg = generate_seed_config(backend->get(), g.model, domain, proposal, seed_opts);
            if (do_register)
                Registry(g.registry).register_environment(proposal, cfg);
            emit(g, out, serialize_seed_config(cfg) + "\n");
        }
        else if (*gen_tasks)
        {
            const auto cfg = load_source(g, src);
            params.rng_seed = g.seed;
            const auto tasks = generate_tasks(cfg, params);
            emit(g, out, task_bundle_text({ cfg.domain, config_hash(cfg), params }, tasks));
        }
        else if (*gen_book)
        {
            if (save_book && src.env.empty())
                throw CLI::ValidationError("--save", "needs --env");
            const auto cfg = load_source(g, src);
            auto backend = make_backend(g);
            auto draft = write_knowledge_book(backend->get(), g.model, cfg);
            const auto review = review_knowledge_book(backend->get(), g.model, g.model, cfg, std::move(draft), review_rounds);
            err << "book for '" << cfg.domain << "': " << (review.verified ? "verified" : "NOT verified") << " after "
                << review.rounds << " revision(s)\n";
            if (save_book)
                Registry(g.registry).save_book(src.env, review.book);
            emit(g, out, review.book + "\n");
        }
        else if (*eval)
        {
            const auto bundle = read_task_bundle(tasks_path);
            const auto fixed_book = book_path.empty() ? std::optional<std::string>() : read_file(book_path);
            std::unique_ptr<Backend> backend;
            if (agent_kind == "llm")
                backend = make_backend(g);
            Registry registry(g.registry);

            std::string text;
            int successes = 0, played = 0;
            for (std::size_t i = 0; i < bundle.tasks.size(); ++i)
            {
                const auto& task = bundle.tasks[i];
                auto book = fixed_book;
                if (!book && fs::exists(g.registry) && registry.find(task.domain))
                    book = registry.load_book(task.domain);
                for (int run = 0; run < runs; ++run)
                {
                    Session session(task, book.value_or(render_plain_book(task)));
                    std::unique_ptr<Agent> agent;
                    std::string model = agent_kind;
                    if (agent_kind == "random")
                        agent = std::make_unique<RandomAgent>(derive_seed(g.seed, { i, static_cast<std::uint64_t>(run) }));
                    else if (agent_kind == "oracle")
                        agent = std::make_unique<OracleAgent>(task);
                    else
                    {
                        agent = std::make_unique<ChatAgent>(backend->get(), g.model);
                        model = g.model;
                    }
                    Trajectory t;
                    try
                    {
                        t = run_episode(session, *agent, { model, run });
                    }
                    catch (const EpisodeAborted& e)
                    {
                        err << "warning: task " << task.id << " aborted: " << e.what() << "\n";
                        t = e.partial;
                    }
                    text += trajectory_to_json(t) + "\n";
                    ++played;
                    successes += t.outcome == TrajectoryOutcome::Success;
                }
            }
            emit(g, out, text);
            err << agent_kind << ": " << successes << "/" << played << " tasks solved\n";
        }
        else if (*golden)
        {
            std::string text;
            for (const auto& task : read_task_bundle(tasks_path).tasks)
                text += golden_to_json(golden_trajectory(task)) + "\n";
            emit(g, out, text);
        }
        else if (*analyze)
        {
            ojson report = ojson::object();
            if (!src.env.empty() || !src.config.empty())
            {
                const auto cfg = load_source(g, src);
                const auto graph = build_domain_graph(cfg);
                ojson comps = ojson::array();
                for (const auto& c : connected_components(graph))
                {
                    ojson members = ojson::array();
                    for (auto i : c)
                        members.push_back(graph.nodes[i]);
                    comps.push_back(members);
                }
                report["domain"] = cfg.domain;
                report["nodes"] = graph.nodes.size();
                report["edges"] = graph.edge_count;
                report["components"] = comps;
                if (graph.edge_count > 0)
                {
                    const auto p = louvain(graph, g.seed);
                    report["louvain"] = { { "communities", p.community_count() }, { "modularity", p.modularity },
                                          { "levels", p.level_modularity }, { "assignment", p.community } };
                }
                else // no edges: Q is taken as 0 and flagged
                    report["louvain"] = { { "communities", graph.nodes.size() }, { "modularity", 0.0 }, { "empty_graph", true } };
            }
            if (!tasks_path.empty() || !trajectories_path.empty())
            {
                if (tasks_path.empty() || trajectories_path.empty())
                    throw CLI::ValidationError("structure test", "needs both --tasks and --trajectories");
                const auto bundle = read_task_bundle(tasks_path);
                std::map<std::string, std::vector<bool>> trials;
                for (const auto& t : load_trajectories(trajectories_path).trajectories)
                    trials[t.task_id].push_back(t.outcome == TrajectoryOutcome::Success);
                const auto r = structure_performance_test(bundle.tasks, trials);
                report["structure_test"] = { { "statistic", r.chi.statistic }, { "p_value", r.chi.p_value },
                                             { "dof", r.chi.dof },           { "cramers_v", r.cramers_v },
                                             { "signatures", r.signatures }, { "table", r.table.counts } };
            }
            if (report.empty())
                throw CLI::ValidationError("analyze", "give --env/--config, or --tasks with --trajectories");
            emit(g, out, report.dump(2) + "\n");
        }
        else if (*split)
        {
            const auto cfg = load_source(g, src);
            const auto n = split_list(names);
            if (!n.empty() && n.size() != 2)
                throw CLI::ValidationError("--names", "needs exactly two names");
            const auto halves = split_environment(cfg, n.empty() ? std::string() : n[0], n.empty() ? std::string() : n[1]);
            if (do_register)
            {
                Registry registry(g.registry);
                const auto base = src.env.empty() ? std::optional<DomainProposal>() : registry.load_proposal(src.env);
                for (const auto* half : { &halves.first, &halves.second })
                    registry.register_environment(base.value_or(DomainProposal { half->goal, "Candidate truths of " + half->domain,
                                                                                 "Actions of " + half->domain }),
                                                  *half);
            }
            ojson j { { "first", config_json(halves.first) }, { "second", config_json(halves.second) } };
            emit(g, out, j.dump(2) + "\n");
        }
        else if (*serve)
        {
            ServiceOptions opts;
            opts.data_dir = data_dir;
            opts.seed = g.seed;
            opts.task_set_pool = pool;
            PlayService service(Registry(g.registry), load_participants(participants_path), opts);
            PlayServer server(service);
            err << "serving on http://" << host << ":" << port << " (data in " << service.data_dir().string() << ")\n";
            server.listen(host, port);
        }
        else if (*score)
        {
            std::vector<TaskInstance> tasks;
            for (const auto& p : bundle_paths)
                for (auto& t : read_task_bundle(p).tasks)
                    tasks.push_back(std::move(t));
            const auto loaded = load_trajectories(trajectories_path);
            if (loaded.corrupt_records)
                err << "warning: skipped " << loaded.corrupt_records << " unreadable trajectory record(s)\n";
            std::vector<GroupKey> keys;
            for (const auto& k : split_list(group_by))
                keys.push_back(group_key(k));
            const auto reports = aggregate(loaded.trajectories, optimal_for(tasks, optimal_cache), keys);
            if (format == "csv")
                emit(g, out, reports_to_csv(reports));
            else if (format == "table")
                emit(g, out, reports_to_table(reports));
            else
            {
                ojson j = ojson::array();
                for (const auto& r : reports)
                    j.push_back({ { "group", r.group },
                                  { "n", r.n },
                                  { "success_rate", r.success_rate },
                                  { "rel_action_mean", r.rel_action_mean },
                                  { "parse_err_rate", r.parse_err_rate },
                                  { "tokens_in", r.tokens_in },
                                  { "tokens_out", r.tokens_out },
                                  { "degenerate_optimal", r.degenerate_optimal } });
                emit(g, out, j.dump(2) + "\n");
            }
        }
    }
    catch (const CLI::ParseError& e)
    {
        err << "error: " << e.what() << "\n";
        return ExitUsage;
    }
    catch (const std::exception& e)
    {
        err << "error: " << e.what() << "\n";
        return ExitFailure;
    }
    return ExitOk;
}

int cli_main(int argc, const char* const* argv)
{
    std::vector<std::string> args(argv + 1, argv + argc);
    return cli_main(args, std::cout, std::cerr);
}

} // namespace kumo
