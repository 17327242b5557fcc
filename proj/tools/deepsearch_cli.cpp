#include "deepsearch/config.hpp"
#include "deepsearch/eval.hpp"
#include "deepsearch/events.hpp"
#include "deepsearch/planner.hpp"
#include "deepsearch/service.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace deepsearch;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitAborted = 1;
constexpr int kExitConfig = 2;

EngineConfig config_from(const std::string& path) {
    if (path.empty()) {
        EngineConfig config;
        validate_config(config);
        return config;
    }
    return load_config(path);
}

int cmd_ask(const std::string& question, const std::string& config_path, const std::string& trace_out) {
    auto config = config_from(config_path);
    auto templates = load_templates(config);
    auto backends = make_backends(config);
    EventLog log("cli", config.event_buffer_cap);
    Planner planner(backends, templates, config.planner, config.searcher, log.sink());
    PlannerSession session = planner.start(question);
    planner.run(session);
    log.close();

    fs::path trace_dir = trace_out.empty() ? config.trace_dir : fs::path(trace_out);
    if (!trace_dir.empty()) write_trace(trace_dir, session, log.events());

    for (const auto& w : session.warnings()) std::cerr << "warning: " << w << "\n";
    auto answer = session.final_answer();
    if (session.status() != SessionStatus::Done || !answer) {
        std::cerr << "session aborted: " << session.error().value_or("no final answer") << "\n";
        return kExitAborted;
    }
    std::cout << answer->answer_text << "\n";
    if (!answer->citations.empty()) {
        std::cout << "\nSources:\n";
        for (std::size_t i = 0; i < answer->citations.size(); ++i)
            std::cout << "[" << i + 1 << "] " << answer->citations[i].title << " <" << answer->citations[i].url << ">\n";
    }
    return kExitOk;
}

int cmd_eval(const std::string& dataset, const std::vector<std::string>& agents, bool judge, const std::string& report_path,
             const std::string& config_path) {
    auto config = config_from(config_path);
    auto templates = load_templates(config);
    auto backends = make_backends(config);
    auto items = load_dataset(dataset);

    std::vector<EvalReport> reports;
    for (const auto& name : agents) {
        EvalOptions options;
        options.agent = *parse_agent_kind(name);
        options.scoring = judge ? Scoring::Judge : Scoring::ExactMatch;
        options.width = config.eval_width;
        options.react_max_steps = config.react_max_steps;
        options.react_top_k = config.react_top_k;
        options.planner = config.planner;
        options.searcher = config.searcher;
        reports.push_back(run_eval(items, options, backends, templates));
    }
    if (!report_path.empty()) {
        std::ofstream out(report_path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write report " + report_path);
        for (const auto& r : reports) out << r.to_jsonl();
    }
    std::cout << render_table(reports);
    for (const auto& r : reports)
        std::cout << display_name(r.agent) << ": " << r.overall.correct << "/" << r.overall.total << " correct\n";
    return kExitOk;
}

int cmd_replay(const std::string& path) {
    fs::path p(path);
    if (fs::is_directory(p)) p /= "events.jsonl";
    std::ifstream in(p, std::ios::binary);
    if (!in) {
        std::cerr << "cannot read " << p.string() << "\n";
        return kExitConfig;
    }
    std::ostringstream os;
    os << in.rdbuf();
    auto events = parse_event_lines(os.str());
    for (const auto& e : events) std::cout << describe_event(e) << "\n";
    std::cout << "\n" << reconstruct_skeleton(events).render();
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"deepsearch: multi-agent web question answering"};
    app.require_subcommand(1);

    std::string config_path;
    std::string question, trace_out;
    auto* ask = app.add_subcommand("ask", "Answer one question and print the answer with its sources");
    ask->add_option("question", question, "The question")->required();
    ask->add_option("--config", config_path, "Config file");
    ask->add_option("--trace-out", trace_out, "Directory for trace files");

    auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
    serve_cmd->add_option("--config", config_path, "Config file");

    std::string dataset, report_path;
    std::vector<std::string> agents;
    bool judge = false;
    auto* eval = app.add_subcommand("eval", "Score agents on a question-answer dataset");
    eval->add_option("dataset", dataset, "Line-delimited dataset")->required();
    eval->add_option("--agent", agents, "nosearch, react or mindsearch (repeatable)")
        ->required()
        ->check(CLI::IsMember({"nosearch", "react", "mindsearch"}));
    eval->add_flag("--judge", judge, "Grade with the LLM judge instead of exact match");
    eval->add_option("--report", report_path, "Write per-item and aggregate records here");
    eval->add_option("--config", config_path, "Config file");

    std::string trace_path;
    auto* replay = app.add_subcommand("replay", "Print a recorded session's events");
    replay->add_option("trace", trace_path, "Trace directory or events.jsonl")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (*ask) return cmd_ask(question, config_path, trace_out);
        if (*serve_cmd) {
            serve(config_from(config_path));
            return kExitOk;
        }
        if (*eval) return cmd_eval(dataset, agents, judge, report_path, config_path);
        if (*replay) return cmd_replay(trace_path);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const MalformedRecord& e) {
        std::cerr << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitAborted;
    }
    return kExitConfig;
}
