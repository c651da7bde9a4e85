#pragma once

#include <string>
#include <vector>

#include "clifs/mlm.hpp"
#include "clifs/vocab.hpp"

namespace clifs::testing {

// Filler tokens plus every default seed, so candidate sets are non-empty.
inline mlm::Tokenizer seed_tokenizer(std::size_t filler = 20) {
    std::vector<std::string> toks{"[PAD]", "[UNK]", "[MASK]"};
    for (std::size_t i = 0; i < filler; ++i) toks.push_back("w" + std::to_string(i));
    const auto s = vocab::SeedLists::defaults();
    for (const auto* list : {&s.identity, &s.target_pronouns, &s.target_specific, &s.target_generic, &s.kinship})
        for (const auto& t : *list)
            if (t.find(' ') == std::string::npos) toks.push_back(t);
    for (const char* w : {"am", "love", "the", "and", "is", "a", "people", "race", "blood"}) toks.push_back(w);
    return mlm::Tokenizer(toks);
}

inline mlm::Vocabularies default_vocabularies() {
    const auto s = vocab::SeedLists::defaults();
    return {s.identity_set(), s.target_set(), s.kinship_set()};
}

}  // namespace clifs::testing
