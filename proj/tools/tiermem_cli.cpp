#include "tiermem/eval/docqa.hpp"
#include "tiermem/eval/dmr.hpp"
#include "tiermem/eval/kv.hpp"
#include "tiermem/eval/metrics.hpp"
#include "tiermem/service/service.hpp"

#include "CLI11.hpp"

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>
#include <unistd.h>

using namespace tiermem;
using nlohmann::json;

namespace {

constexpr int kExitError = 1;
constexpr int kExitNotFound = 2;

struct Globals {
    std::string data_dir;
    std::string config_file;
    bool json_errors = false;
};

int fail(const Globals& g, const Error& e, int code = kExitError) {
    if (g.json_errors)
        std::cerr << json{{"error", {{"code", std::string(to_string(e.code))}, {"message", e.message}}}}.dump() << "\n";
    else
        std::cerr << "error: " << e.what() << "\n";
    return code;
}

Result<std::string> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return make_error(Errc::Io, "cannot read " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Result<AgentConfig> base_config(const Globals& g, AgentConfig fallback = {}) {
    if (g.config_file.empty()) return fallback;
    return load_config_file(g.config_file, fallback);
}

Result<std::unique_ptr<service::Registry>> open_registry(const Globals& g) {
    auto cfg = base_config(g);
    if (!cfg) return cfg.error();
    service::ServiceOptions opts;
    opts.data_dir = g.data_dir;
    opts.defaults = *cfg;
    auto reg = std::make_unique<service::Registry>(opts);
    for (const auto& [id, err] : reg->load_all()) std::cerr << "warning: skipped " << id << ": " << err.what() << "\n";
    return reg;
}

std::string fixed3(double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(3) << v;
    return os.str();
}

class OptionalFile {
public:
    explicit OptionalFile(const std::string& path) {
        if (!path.empty()) out_.open(path, std::ios::trunc);
    }
    bool bad(const std::string& path) const { return !path.empty() && !out_; }
    void line(const std::string& s) {
        if (out_) out_ << s << "\n";
    }

private:
    std::ofstream out_;
};

int cmd_agent_new(const Globals& g, const std::string& name) {
    auto reg = open_registry(g);
    if (!reg) return fail(g, reg.error());
    auto host = (*reg)->create(name, json::object());
    if (!host) return fail(g, host.error());
    std::cout << (*host)->descriptor().agent_id << "\n";
    return 0;
}

int cmd_agent_list(const Globals& g) {
    auto reg = open_registry(g);
    if (!reg) return fail(g, reg.error());
    for (const auto& h : (*reg)->list()) {
        const auto& d = h->descriptor();
        std::cout << d.agent_id << "\t" << d.name << "\t" << format_iso8601(d.created_at) << "\n";
    }
    return 0;
}

int cmd_agent_rm(const Globals& g, const std::string& id) {
    auto reg = open_registry(g);
    if (!reg) return fail(g, reg.error());
    if (auto r = (*reg)->remove(id); !r)
        return fail(g, r.error(), r.error().code == Errc::NotFound ? kExitNotFound : kExitError);
    std::cout << "removed " << id << "\n";
    return 0;
}

int cmd_chat(const Globals& g, const std::string& id, bool debug) {
    auto reg = open_registry(g);
    if (!reg) return fail(g, reg.error());
    auto host = (*reg)->find(id);
    if (!host) return fail(g, make_error(Errc::NotFound, "unknown agent " + id), kExitNotFound);
    const bool interactive = isatty(STDIN_FILENO);
    std::string line;
    while (true) {
        if (interactive) std::cout << "you> " << std::flush;
        if (!std::getline(std::cin, line)) break;
        if (line == "/quit" || line == "/exit") break;
        if (line.empty()) continue;
        auto trace = host->submit(EventKind::user_message, line);
        if (!trace) {
            fail(g, trace.error());
            continue;
        }
        if (debug) {
            for (const auto& e : trace_entries(*trace)) {
                const std::string kind = e["kind"];
                if (kind == "outbound") continue;
                std::cout << "  [" << kind << "] "
                          << (e["data"].is_string() ? e["data"].get<std::string>() : e["data"].dump()) << "\n";
            }
        }
        for (const auto& o : trace->outbound) std::cout << "agent> " << o << "\n";
        if (trace->chain_limit_hit) std::cout << "  (" << kChainLimitNote << ")\n";
        if (auto r = (*reg)->persist(id); !r) return fail(g, r.error());
    }
    return 0;
}

int cmd_ingest(const Globals& g, const std::string& id, const std::string& file) {
    auto reg = open_registry(g);
    if (!reg) return fail(g, reg.error());
    auto host = (*reg)->find(id);
    if (!host) return fail(g, make_error(Errc::NotFound, "unknown agent " + id), kExitNotFound);
    auto text = read_file(file);
    if (!text) return fail(g, text.error());
    const auto paragraphs = eval::split_paragraphs(*text);
    if (paragraphs.empty()) {
        std::cerr << "warning: 0 entries in " << file << "\n";
        std::cout << "ingested 0 entries\n";
        return 0;
    }
    for (const auto& p : paragraphs)
        if (auto r = host->archival_insert(p); !r) return fail(g, r.error());
    if (auto r = (*reg)->persist(id); !r) return fail(g, r.error());
    std::cout << "ingested " << paragraphs.size() << " entries\n";
    return 0;
}

struct KvArgs {
    std::vector<int> depths;
    std::uint64_t seed = 0;
    int orderings = 30;
    bool baseline = false;
    std::string jsonl, csv;
};

int cmd_bench_kv(const Globals& g, const KvArgs& a) {
    auto cfg = base_config(g);
    if (!cfg) return fail(g, cfg.error());
    OptionalFile jsonl(a.jsonl), csv(a.csv);
    if (jsonl.bad(a.jsonl) || csv.bad(a.csv)) return fail(g, make_error(Errc::Io, "cannot open output file"));
    csv.line("task,mode,depth,runs,correct,accuracy");
    const auto mode = a.baseline ? eval::KvMode::truncation : eval::KvMode::archival;
    const std::string mode_name = a.baseline ? "truncation" : "archival";
    std::vector<int> depths = a.depths;
    if (depths.empty())
        for (int d = 0; d <= eval::kKvMaxDepth; ++d) depths.push_back(d);
    for (int d : depths) {
        int correct = 0;
        for (int o = 0; o < a.orderings; ++o) {
            auto ds = eval::gen_kv(d, a.seed, static_cast<std::uint64_t>(o));
            if (!ds) return fail(g, ds.error());
            auto run = eval::run_kv(*cfg, *ds, mode);
            if (!run) return fail(g, run.error());
            correct += run->correct ? 1 : 0;
            jsonl.line(json{{"task", "kv"}, {"mode", mode_name}, {"depth", d}, {"seed", a.seed}, {"ordering", o},
                            {"correct", run->correct}, {"calls", run->n_processor_calls},
                            {"searches", run->n_search_calls}}
                           .dump());
        }
        const double acc = a.orderings > 0 ? static_cast<double>(correct) / a.orderings : 0.0;
        std::cout << "depth=" << d << " acc=" << fixed3(acc) << "\n";
        csv.line("kv," + mode_name + "," + std::to_string(d) + "," + std::to_string(a.orderings) + "," +
                 std::to_string(correct) + "," + fixed3(acc));
    }
    return 0;
}

int cmd_bench_dmr(const Globals& g, std::uint64_t seed, int cases, bool baseline, const std::string& jsonl_path) {
    auto cfg = base_config(g, eval::dmr_config());
    if (!cfg) return fail(g, cfg.error());
    OptionalFile jsonl(jsonl_path);
    if (jsonl.bad(jsonl_path)) return fail(g, make_error(Errc::Io, "cannot open " + jsonl_path));
    int hits = 0;
    double recall_sum = 0;
    for (int i = 0; i < cases; ++i) {
        const std::uint64_t s = seed + static_cast<std::uint64_t>(i);
        auto c = eval::gen_dmr(s);
        auto run = eval::run_dmr(*cfg, c, baseline ? eval::DmrMode::summary_only : eval::DmrMode::recall);
        if (!run) return fail(g, run.error());
        const bool correct = run->answer.find(c.gold_answer) != std::string::npos;
        hits += correct ? 1 : 0;
        recall_sum += run->rouge.recall;
        std::cout << "seed=" << s << " retrieved_gold=" << (run->retrieved_gold ? "true" : "false")
                  << " rouge_p=" << fixed3(run->rouge.precision) << " rouge_r=" << fixed3(run->rouge.recall)
                  << " rouge_f1=" << fixed3(run->rouge.f1) << "\n";
        jsonl.line(json{{"task", "dmr"}, {"mode", baseline ? "summary_only" : "recall"}, {"seed", s},
                        {"correct", correct}, {"retrieved_gold", run->retrieved_gold},
                        {"gold_in_context", run->gold_in_context}, {"rouge", {{"p", run->rouge.precision},
                        {"r", run->rouge.recall}, {"f1", run->rouge.f1}}}, {"answer", run->answer}}
                       .dump());
    }
    if (cases > 1)
        std::cout << "dmr acc=" << fixed3(static_cast<double>(hits) / cases)
                  << " mean_rouge_r=" << fixed3(recall_sum / cases) << "\n";
    return 0;
}

int cmd_bench_docqa(const Globals& g, const std::vector<std::string>& corpus_files, const std::string& questions_file,
                    std::size_t k, const std::string& mode, const std::string& jsonl_path) {
    auto cfg = base_config(g);
    if (!cfg) return fail(g, cfg.error());
    std::vector<std::string> corpus;
    for (const auto& f : corpus_files) {
        auto t = read_file(f);
        if (!t) return fail(g, t.error());
        corpus.push_back(std::move(*t));
    }
    auto qtext = read_file(questions_file);
    if (!qtext) return fail(g, qtext.error());
    auto questions = eval::parse_questions(*qtext);
    if (!questions) return fail(g, questions.error());
    OptionalFile jsonl(jsonl_path);
    if (jsonl.bad(jsonl_path)) return fail(g, make_error(Errc::Io, "cannot open " + jsonl_path));
    std::vector<std::pair<std::string, eval::DocQaMode>> modes;
    if (mode == "fixed" || mode == "both") modes.emplace_back("fixed", eval::DocQaMode::fixed_k);
    if (mode == "paged" || mode == "both") modes.emplace_back("paged", eval::DocQaMode::paged);
    for (const auto& [name, m] : modes) {
        auto r = eval::run_docqa(*cfg, corpus, *questions, k, m);
        if (!r) return fail(g, r.error());
        std::cout << "mode=" << name << " k=" << k << " acc=" << fixed3(r->accuracy) << "\n";
        for (std::size_t i = 0; i < r->total; ++i)
            jsonl.line(json{{"task", "docqa"}, {"mode", name}, {"K", k}, {"question", (*questions)[i].question},
                            {"correct", static_cast<bool>(r->per_question[i])}, {"calls", r->pages_read[i]},
                            {"answer", r->answers[i]}}
                           .dump());
    }
    return 0;
}

int cmd_metrics_rouge(const Globals& g, const std::string& cand_file, const std::string& ref_file) {
    auto c = read_file(cand_file);
    if (!c) return fail(g, c.error());
    auto r = read_file(ref_file);
    if (!r) return fail(g, r.error());
    const auto s = eval::rouge_l(*c, *r);
    std::cout << "P=" << fixed3(s.precision) << " R=" << fixed3(s.recall) << " F1=" << fixed3(s.f1) << "\n";
    return 0;
}

int cmd_metrics_csim(const Globals& g, const std::string& opener_file, const std::string& persona_file,
                     const std::string& human_file) {
    auto cfg = base_config(g);
    if (!cfg) return fail(g, cfg.error());
    auto embedder = make_embedder(*cfg);
    if (!embedder) return fail(g, embedder.error());
    auto opener = read_file(opener_file);
    if (!opener) return fail(g, opener.error());
    auto persona = read_file(persona_file);
    if (!persona) return fail(g, persona.error());
    auto human = read_file(human_file);
    if (!human) return fail(g, human.error());
    std::vector<std::string> fragments;
    std::istringstream lines(*persona);
    for (std::string l; std::getline(lines, l);)
        if (!l.empty()) fragments.push_back(l);
    auto s = eval::csim(*opener, fragments, *human, **embedder);
    if (!s) return fail(g, s.error());
    std::cout << "CSIM-1=" << fixed3(s->csim1) << " CSIM-3=" << fixed3(s->csim3) << " CSIM-H=" << fixed3(s->csimH)
              << "\n";
    return 0;
}

int cmd_serve(const Globals& g, const std::string& host, int port, int tick_seconds) {
    // Signals are taken synchronously by a watcher thread.
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);

    auto reg = open_registry(g);
    if (!reg) return fail(g, reg.error());
    service::HttpService http(**reg);
    auto bound = http.bind(host, port);
    if (!bound) return fail(g, bound.error());
    std::cout << "listening on " << host << ":" << *bound << " data-dir " << g.data_dir << std::endl;

    std::atomic<bool> running{true};
    std::thread ticker([&] {
        while (running) {
            for (int i = 0; i < tick_seconds * 10 && running; ++i)
                std::this_thread::sleep_for(std::chrono::milliseconds(100));
            if (running) (*reg)->tick_all(now_utc());
        }
    });
    std::thread watcher([&] {
        int sig = 0;
        sigwait(&set, &sig);
        running = false;
        http.stop();
    });
    http.listen();
    running = false;
    pthread_kill(watcher.native_handle(), SIGTERM);
    watcher.join();
    ticker.join();
    int status = 0;
    for (const auto& h : (*reg)->list())
        if (auto r = (*reg)->persist(h->descriptor().agent_id); !r) status = fail(g, r.error());
    return status;
}

std::string default_data_dir() {
    const char* env = std::getenv("TIERMEM_DATA");
    return env && *env ? env : "tiermem-data";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tiermem: tiered-memory agent runtime"};
    app.require_subcommand(1);
    Globals g;
    g.data_dir = default_data_dir();
    app.add_option("--data-dir", g.data_dir, "Agent storage directory (env TIERMEM_DATA)");
    app.add_option("--config", g.config_file, "Config file (.json or key = value)");
    app.add_flag("--json", g.json_errors, "Errors as JSON on stderr");

    int rc = 0;

    auto* agent = app.add_subcommand("agent", "Create, list and remove agents");
    agent->require_subcommand(1);
    std::string name = "agent", id;
    auto* agent_new = agent->add_subcommand("new", "Create an agent and print its id");
    agent_new->add_option("name", name, "Display name");
    agent_new->callback([&] { rc = cmd_agent_new(g, name); });
    agent->add_subcommand("list", "List agents")->callback([&] { rc = cmd_agent_list(g); });
    auto* agent_rm = agent->add_subcommand("rm", "Remove an agent and its storage");
    agent_rm->add_option("id", id)->required();
    agent_rm->callback([&] { rc = cmd_agent_rm(g, id); });

    bool debug = false;
    auto* chat = app.add_subcommand("chat", "Talk to an agent on stdin/stdout");
    chat->add_option("id", id)->required();
    chat->add_flag("--debug", debug, "Show monologue and function activity");
    chat->callback([&] { rc = cmd_chat(g, id, debug); });

    std::string file;
    auto* ingest = app.add_subcommand("ingest", "Load a text file into archival storage, one entry per paragraph");
    ingest->add_option("id", id)->required();
    ingest->add_option("file", file)->required();
    ingest->callback([&] { rc = cmd_ingest(g, id, file); });

    auto* bench = app.add_subcommand("bench", "Run evaluation tasks");
    bench->require_subcommand(1);
    KvArgs kv;
    auto* bench_kv = bench->add_subcommand("kv", "Nested key-value retrieval");
    bench_kv->add_option("--depth", kv.depths, "Nesting depths (default 0-4)")->check(CLI::Range(0, eval::kKvMaxDepth));
    bench_kv->add_option("--seed", kv.seed, "Pair seed");
    bench_kv->add_option("--orderings", kv.orderings, "Ordering seeds 0..N-1")->check(CLI::PositiveNumber);
    bench_kv->add_flag("--baseline", kv.baseline, "Truncation baseline without archival functions");
    bench_kv->add_option("--jsonl", kv.jsonl, "Per-run JSON lines output");
    bench_kv->add_option("--csv", kv.csv, "Summary CSV output");
    bench_kv->callback([&] { rc = cmd_bench_kv(g, kv); });

    std::uint64_t dmr_seed = 0;
    int dmr_cases = 1;
    bool dmr_baseline = false;
    std::string jsonl;
    auto* bench_dmr = bench->add_subcommand("dmr", "Deep memory retrieval");
    bench_dmr->add_option("--seed", dmr_seed, "First case seed");
    bench_dmr->add_option("--cases", dmr_cases, "Number of consecutive seeds")->check(CLI::PositiveNumber);
    bench_dmr->add_flag("--baseline", dmr_baseline, "Summary-only baseline (recall search disabled)");
    bench_dmr->add_option("--jsonl", jsonl, "Per-case JSON lines output");
    bench_dmr->callback([&] { rc = cmd_bench_dmr(g, dmr_seed, dmr_cases, dmr_baseline, jsonl); });

    std::vector<std::string> corpus;
    std::string questions, docqa_mode = "both";
    std::size_t k = 3;
    auto* bench_docqa = bench->add_subcommand("docqa", "Document QA over archival storage");
    bench_docqa->add_option("--corpus", corpus, "Corpus text files")->required();
    bench_docqa->add_option("--questions", questions, "JSON array of {question, answer}")->required();
    bench_docqa->add_option("--k", k, "Paragraphs per read")->check(CLI::PositiveNumber);
    bench_docqa->add_option("--mode", docqa_mode)->check(CLI::IsMember({"fixed", "paged", "both"}));
    bench_docqa->add_option("--jsonl", jsonl, "Per-question JSON lines output");
    bench_docqa->callback([&] { rc = cmd_bench_docqa(g, corpus, questions, k, docqa_mode, jsonl); });

    auto* metrics = app.add_subcommand("metrics", "Score texts");
    metrics->require_subcommand(1);
    std::string f1, f2, f3;
    auto* rouge = metrics->add_subcommand("rouge", "ROUGE-L of a candidate file against a reference file");
    rouge->add_option("candidate", f1)->required();
    rouge->add_option("reference", f2)->required();
    rouge->callback([&] { rc = cmd_metrics_rouge(g, f1, f2); });
    auto* csim = metrics->add_subcommand("csim", "CSIM scores; persona file has one fragment per line");
    csim->add_option("opener", f1)->required();
    csim->add_option("persona", f2)->required();
    csim->add_option("human_opener", f3)->required();
    csim->callback([&] { rc = cmd_metrics_csim(g, f1, f2, f3); });

    std::string host = "127.0.0.1";
    int port = 8080, tick_seconds = 1;
    auto* serve = app.add_subcommand("serve", "HTTP/JSON + SSE server");
    serve->add_option("--host", host);
    serve->add_option("--port", port)->check(CLI::Range(0, 65535));
    serve->add_option("--tick-seconds", tick_seconds, "Scheduler period")->check(CLI::PositiveNumber);
    serve->callback([&] { rc = cmd_serve(g, host, port, tick_seconds); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (g.json_errors && e.get_exit_code() != 0) {
            std::cerr << json{{"error", {{"code", "Usage"}, {"message", e.what()}}}}.dump() << "\n";
            return 64;
        }
        const int code = app.exit(e);
        return code == 0 ? 0 : 64;
    }
    return rc;
}
