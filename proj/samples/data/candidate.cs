bool IsEmpty(List<string> items)
{
    return items.Count == 0;
}
