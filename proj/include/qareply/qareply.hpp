#pragma once

#include "qareply/anchor.hpp"
#include "qareply/digest.hpp"
#include "qareply/domain.hpp"
#include "qareply/draft_engine.hpp"
#include "qareply/error.hpp"
#include "qareply/http_api.hpp"
#include "qareply/ingest.hpp"
#include "qareply/llm.hpp"
#include "qareply/metrics.hpp"
#include "qareply/prompt.hpp"
#include "qareply/question_engine.hpp"
#include "qareply/service.hpp"
#include "qareply/session_store.hpp"
#include "qareply/utf8.hpp"
#include "qareply/validate.hpp"
