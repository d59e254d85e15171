namespace bopo {}
