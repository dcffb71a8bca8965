#pragma once

#include "triplex/classify.hpp"
#include "triplex/config.hpp"
#include "triplex/conllu.hpp"
#include "triplex/corpus.hpp"
#include "triplex/digest.hpp"
#include "triplex/embed.hpp"
#include "triplex/error.hpp"
#include "triplex/gmm.hpp"
#include "triplex/hdbscan.hpp"
#include "triplex/kmeans.hpp"
#include "triplex/matrix.hpp"
#include "triplex/metrics.hpp"
#include "triplex/parallel.hpp"
#include "triplex/propagate.hpp"
#include "triplex/remote_provider.hpp"
#include "triplex/report.hpp"
#include "triplex/repr.hpp"
#include "triplex/rng.hpp"
#include "triplex/sweep.hpp"
#include "triplex/triples.hpp"
#include "triplex/unicode.hpp"
