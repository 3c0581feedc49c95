#include "bfav/lp_format.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace bfav {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void append_terms(std::string& line, const MilpModel& model,
                  const std::vector<MilpTerm>& terms) {
    bool first = true;
    for (const MilpTerm& t : terms) {
        double c = t.coef;
        if (first) {
            if (c < 0.0) {
                line += "- ";
                c = -c;
            }
            first = false;
        } else {
            line += c < 0.0 ? " - " : " + ";
            if (c < 0.0) c = -c;
        }
        line += fmt(c);
        line += ' ';
        line += model.vars[static_cast<size_t>(t.var)].name;
    }
}

const char* sense_text(Sense s) {
    switch (s) {
        case Sense::kLe: return "<=";
        case Sense::kGe: return ">=";
        case Sense::kEq: return "=";
    }
    return "<=";
}

}  // namespace

std::string lp_text(const MilpModel& model) {
    std::string out;
    out += "\\ feasibility model\n";
    out += "Minimize\n obj:\n";
    out += "Subject To\n";
    for (const MilpConstraint& c : model.constraints) {
        std::string line = " ";
        line += c.name;
        line += ": ";
        append_terms(line, model, c.terms);
        line += ' ';
        line += sense_text(c.sense);
        line += ' ';
        line += fmt(c.rhs);
        line += '\n';
        out += line;
    }
    out += "Bounds\n";
    for (const MilpVar& v : model.vars) {
        if (v.is_binary) continue;
        std::string line = " ";
        if (v.lo == v.hi) {
            line += v.name;
            line += " = ";
            line += fmt(v.lo);
        } else {
            line += fmt(v.lo);
            line += " <= ";
            line += v.name;
            line += " <= ";
            line += fmt(v.hi);
        }
        line += '\n';
        out += line;
    }
    bool any_binary = false;
    for (const MilpVar& v : model.vars) any_binary |= v.is_binary;
    if (any_binary) {
        out += "Binary\n";
        for (const MilpVar& v : model.vars)
            if (v.is_binary) {
                out += ' ';
                out += v.name;
                out += '\n';
            }
    }
    out += "End\n";
    return out;
}

void export_lp(const MilpModel& model, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw ParseError("cannot open LP output file: " + path);
    f << lp_text(model);
    if (!f) throw ParseError("failed writing LP file: " + path);
}

namespace {

bool is_number_start(const std::string& tok) {
    char c = tok[0];
    return (c >= '0' && c <= '9') || c == '.' || ((c == '-' || c == '+') && tok.size() > 1);
}

double to_number(const std::string& tok) {
    size_t pos = 0;
    double v = std::stod(tok, &pos);
    if (pos != tok.size()) throw ParseError("bad number in LP file: " + tok);
    return v;
}

std::vector<std::string> tokens_of(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream in(line);
    std::string t;
    while (in >> t) out.push_back(t);
    return out;
}

}  // namespace

MilpModel parse_lp_text(const std::string& text) {
    MilpModel model;
    std::map<std::string, int> var_index;
    auto intern = [&](const std::string& name) {
        auto it = var_index.find(name);
        if (it != var_index.end()) return it->second;
        int idx = model.add_var(name, 0.0, 0.0);
        var_index.emplace(name, idx);
        return idx;
    };

    enum class Section { kNone, kObjective, kConstraints, kBounds, kBinary, kEnd };
    Section section = Section::kNone;

    std::istringstream in(text);
    std::string raw;
    while (std::getline(in, raw)) {
        std::string line = raw;
        if (auto pos = line.find('\\'); pos != std::string::npos) line.erase(pos);
        std::vector<std::string> toks = tokens_of(line);
        if (toks.empty()) continue;

        std::string head = toks[0];
        if (head == "Minimize" || head == "Maximize") {
            section = Section::kObjective;
            continue;
        }
        if (head == "Subject") {
            section = Section::kConstraints;
            continue;
        }
        if (head == "Bounds") {
            section = Section::kBounds;
            continue;
        }
        if (head == "Binary" || head == "Binaries") {
            section = Section::kBinary;
            continue;
        }
        if (head == "End") {
            section = Section::kEnd;
            continue;
        }

        switch (section) {
            case Section::kObjective:
                break;  // objective-free models only
            case Section::kConstraints: {
                if (toks[0].back() != ':')
                    throw ParseError("constraint line without a name: " + raw);
                std::string name = toks[0].substr(0, toks[0].size() - 1);
                std::vector<MilpTerm> terms;
                double sign = 1.0;
                size_t i = 1;
                Sense sense = Sense::kLe;
                double rhs = 0.0;
                bool done = false;
                while (i < toks.size()) {
                    const std::string& t = toks[i];
                    if (t == "+") {
                        sign = 1.0;
                        ++i;
                    } else if (t == "-") {
                        sign = -1.0;
                        ++i;
                    } else if (t == "<=" || t == ">=" || t == "=") {
                        sense = t == "<=" ? Sense::kLe : t == ">=" ? Sense::kGe : Sense::kEq;
                        rhs = to_number(toks.at(i + 1));
                        done = true;
                        break;
                    } else if (is_number_start(t)) {
                        double c = to_number(t) * sign;
                        const std::string& var = toks.at(i + 1);
                        terms.push_back({intern(var), c});
                        sign = 1.0;
                        i += 2;
                    } else {
                        terms.push_back({intern(t), sign});
                        sign = 1.0;
                        ++i;
                    }
                }
                if (!done) throw ParseError("constraint without relation: " + raw);
                model.add_constraint(name, std::move(terms), sense, rhs);
                break;
            }
            case Section::kBounds: {
                if (toks.size() == 5 && toks[1] == "<=" && toks[3] == "<=") {
                    int v = intern(toks[2]);
                    model.vars[static_cast<size_t>(v)].lo = to_number(toks[0]);
                    model.vars[static_cast<size_t>(v)].hi = to_number(toks[4]);
                } else if (toks.size() == 3 && toks[1] == "=") {
                    int v = intern(toks[0]);
                    model.vars[static_cast<size_t>(v)].lo = to_number(toks[2]);
                    model.vars[static_cast<size_t>(v)].hi = to_number(toks[2]);
                } else {
                    throw ParseError("unsupported bounds line: " + raw);
                }
                break;
            }
            case Section::kBinary: {
                for (const std::string& t : toks) {
                    int v = intern(t);
                    model.vars[static_cast<size_t>(v)].is_binary = true;
                    model.vars[static_cast<size_t>(v)].lo = 0.0;
                    model.vars[static_cast<size_t>(v)].hi = 1.0;
                }
                break;
            }
            case Section::kNone:
            case Section::kEnd:
                throw ParseError("unexpected content outside sections: " + raw);
        }
    }
    return model;
}

MilpModel import_lp(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ParseError("cannot open LP file: " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return parse_lp_text(buf.str());
}

}  // namespace bfav
